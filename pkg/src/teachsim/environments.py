"""Sequential domains: a generic finite MDP container, the noisy Bitflip
shift register, and an object-oriented Taxi gridworld whose actions carry
conjunctive preconditions over grounded predicates."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .concepts import DbnConcept, MonotoneConjunction, bitflip_shift_concept
from .core import RandomSource

State = Hashable
Action = Hashable


class TruncationError(RuntimeError):
    """Reachability enumeration hit the configured state cap."""


@dataclass(frozen=True)
class TransitionExperience:
    """One witnessed transition: state, action, reward, next state."""

    state: State
    action: Action
    reward: float
    next_state: State


@dataclass(frozen=True)
class SequenceStep:
    """One step of a teaching sequence. ``observation`` carries the
    environment's success/failure label where it has one (Taxi), else
    None."""

    state: State
    action: Action
    reward: float
    observation: object
    next_state: State


@dataclass(frozen=True)
class TeachingSequence:
    """Ordered trace of (state, action, reward) steps starting at the
    environment's start state. Unlike a teaching collection, the order is
    visible to sequential learners."""

    steps: tuple[SequenceStep, ...]
    final_state: State

    def __len__(self) -> int:
        return len(self.steps)

    def triples(self) -> list[tuple[State, Action, float]]:
        return [(s.state, s.action, s.reward) for s in self.steps]


def step(env, state: State, action: Action,
         rng: RandomSource | None = None) -> tuple[State, float, object]:
    """Execute one action: sample the next state from the transition
    distribution, and return (next_state, reward, observation). The
    observation is the environment's success label where defined (Taxi's
    precondition outcome), else None. Deterministic rows need no rng."""
    dist = env.transition(state, action)
    if len(dist) == 1:
        nxt = next(iter(dist))
    else:
        if rng is None:
            raise ValueError("stochastic transition requires an rng")
        u = rng.random()
        acc = 0.0
        nxt = None
        for s, p in sorted(dist.items()):
            acc += p
            if u < acc:
                nxt = s
                break
        if nxt is None:  # guard against accumulated rounding
            nxt = max(sorted(dist.items()), key=lambda kv: kv[1])[0]
    reward = env.reward(state, action)
    observe = getattr(env, "observation", None)
    obs = observe(state, action) if observe is not None else None
    return nxt, reward, obs


def enumerate_reachable(env, horizon: int | None = None,
                        max_states: int = 200_000) -> list[TransitionExperience]:
    """Breadth-first closure of transitions reachable from the start state.

    ``horizon`` limits the depth of states whose outgoing transitions are
    included (0 keeps only the start state's transitions); None takes the
    full closure. Stochastic rows contribute one experience per support
    state. Raises :class:`TruncationError` past ``max_states``.
    """
    start = env.start_state
    depth = {start: 0}
    frontier = [start]
    out: list[TransitionExperience] = []
    while frontier:
        nxt_frontier: list[State] = []
        for s in frontier:
            if horizon is not None and depth[s] > horizon:
                continue
            for a in env.actions(s):
                r = env.reward(s, a)
                for s2 in sorted(env.transition(s, a)):
                    out.append(TransitionExperience(s, a, r, s2))
                    if s2 not in depth:
                        depth[s2] = depth[s] + 1
                        if len(depth) > max_states:
                            raise TruncationError(
                                f"reachable state count exceeded {max_states}")
                        nxt_frontier.append(s2)
        frontier = nxt_frontier
    return out


class Mdp:
    """Explicit-table finite MDP: transition rows are dictionaries over
    next states and must be valid distributions; a deterministic MDP must
    have point-mass rows."""

    def __init__(self, transitions: Mapping[tuple[State, Action], Mapping[State, float]],
                 rewards: Mapping[tuple[State, Action], float] | None,
                 start_state: State, gamma: float = 0.95,
                 deterministic: bool | None = None):
        if not (0.0 <= gamma < 1.0):
            raise ValueError("gamma must lie in [0,1)")
        self._transitions = {k: dict(v) for k, v in transitions.items()}
        for (s, a), row in self._transitions.items():
            total = sum(row.values())
            if abs(total - 1.0) > 1e-9 or any(p < 0 for p in row.values()):
                raise ValueError(f"transition row for {(s, a)!r} is not a distribution")
        self._rewards = dict(rewards) if rewards else {}
        self.start_state = start_state
        self.gamma = gamma
        point_mass = all(len(row) == 1 for row in self._transitions.values())
        if deterministic is None:
            deterministic = point_mass
        elif deterministic and not point_mass:
            raise ValueError("deterministic MDPs must have point-mass rows")
        self.deterministic = deterministic
        self._actions: dict[State, list[Action]] = {}
        for s, a in self._transitions:
            self._actions.setdefault(s, []).append(a)

    def actions(self, state: State) -> tuple[Action, ...]:
        return tuple(self._actions.get(state, ()))

    def transition(self, state: State, action: Action) -> dict[State, float]:
        return self._transitions[(state, action)]

    def reward(self, state: State, action: Action) -> float:
        return self._rewards.get((state, action), 0.0)


# ---------------------------------------------------------------------------
# Bitflip


class BitflipEnv:
    """n-bit register with two actions: ``flip0`` deterministically
    toggles bit 0, and ``shift`` moves every bit's value up one position.
    The shift into bit i succeeds with probability ``shift_success[i]``
    (bit 0 receives a constant 0); on failure the bit keeps its current
    value."""

    ACTIONS = ("flip0", "shift")

    def __init__(self, n: int, shift_success: Sequence[float]):
        if n < 1:
            raise ValueError("need at least one bit")
        p = tuple(float(v) for v in shift_success)
        if len(p) != n or any(not (0.0 <= v <= 1.0) for v in p):
            raise ValueError("shift_success must give one probability in [0,1] per bit")
        self.n = n
        self.shift_success = p
        self.start_state: tuple[int, ...] = (0,) * n
        self.deterministic = all(v in (0.0, 1.0) for v in p)
        self._transition_cache: dict = {}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BitflipEnv":
        n = int(d["bits"])
        if "shift_success" in d:
            p = [float(v) for v in d["shift_success"]]
        else:
            default = float(d.get("stochastic_success", 0.5))
            stochastic = {int(i) for i in d.get("stochastic_bits", ())}
            p = [default if i in stochastic else 1.0 for i in range(n)]
        return cls(n, p)

    def actions(self, state) -> tuple[str, ...]:
        return self.ACTIONS

    def reward(self, state, action) -> float:
        return 0.0

    def shift_concept(self) -> DbnConcept:
        return bitflip_shift_concept(self.n, self.shift_success)

    def transition(self, state: tuple[int, ...], action: str) -> dict[tuple[int, ...], float]:
        cached = self._transition_cache.get((state, action))
        if cached is not None:
            return cached
        dist = self._transition(state, action)
        self._transition_cache[(state, action)] = dist
        return dist

    def _transition(self, state: tuple[int, ...], action: str) -> dict[tuple[int, ...], float]:
        if len(state) != self.n:
            raise ValueError(f"state must have {self.n} bits")
        if action == "flip0":
            nxt = (1 - state[0],) + state[1:]
            return {nxt: 1.0}
        if action != "shift":
            raise ValueError(f"unknown action {action!r}")
        # per-bit outcome sets; bits whose incoming value equals the kept
        # value (or whose success probability is 0 or 1) do not branch
        per_bit: list[dict[int, float]] = []
        for i in range(self.n):
            incoming = 0 if i == 0 else state[i - 1]
            keep = state[i]
            p = self.shift_success[i]
            if incoming == keep or p == 0.0:
                per_bit.append({keep: 1.0})
            elif p == 1.0:
                per_bit.append({incoming: 1.0})
            else:
                per_bit.append({incoming: p, keep: 1.0 - p})
        dist: dict[tuple[int, ...], float] = {}
        for combo in itertools.product(*(d.items() for d in per_bit)):
            bits = tuple(v for v, _ in combo)
            prob = 1.0
            for _, q in combo:
                prob *= q
            dist[bits] = dist.get(bits, 0.0) + prob
        return dist


# ---------------------------------------------------------------------------
# Taxi


@dataclass(frozen=True)
class ActionSchema:
    """A parameterised action: name, argument count, the fixed predicate
    vocabulary evaluated per grounding, and the indices of the vocabulary
    entries that form the true precondition conjunction."""

    name: str
    arity: int
    vocabulary: tuple[str, ...]
    relevant: frozenset[int]

    def precondition(self) -> MonotoneConjunction:
        return MonotoneConjunction(len(self.vocabulary), self.relevant)


@dataclass(frozen=True)
class GroundedInstance:
    """An action schema with bound arguments and the boolean predicate
    vector that grounding evaluates to in some state."""

    schema: str
    binding: tuple[str, ...]
    vector: tuple[int, ...]


GroundedAction = tuple[str, tuple[str, ...]]

_DIRS = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}
_DIR_LABEL = {"up": "north", "down": "south", "left": "west", "right": "east"}

_ABOUT_ARG0 = tuple(f"{kind}_{side}(a0)"
                    for kind in ("wall", "clear")
                    for side in ("north", "south", "east", "west"))


def _movement_schema(name: str) -> ActionSchema:
    relevant = frozenset({_ABOUT_ARG0.index(f"clear_{_DIR_LABEL[name]}(a0)")})
    return ActionSchema(name, 1, _ABOUT_ARG0, relevant)


# Vocabularies exclude predicates entailed by the rest of a successful
# grounding (co-location is transitive, "a0 is out of the taxi" holds in
# every pickup success), since an entailed predicate could never be
# dispelled by any reachable positive example.
_PICKUP_VOCAB = _ABOUT_ARG0 + ("on(a0,a1)", "on(a1,a2)", "in_taxi(a1)", "not_in_taxi(a1)")
_DROPOFF_VOCAB = _ABOUT_ARG0 + ("on(a0,a2)", "in_taxi(a1)", "not_in_taxi(a1)")

_DEFAULT_SCHEMAS = {
    "up": _movement_schema("up"),
    "down": _movement_schema("down"),
    "left": _movement_schema("left"),
    "right": _movement_schema("right"),
    "pickup": ActionSchema(
        "pickup", 3, _PICKUP_VOCAB,
        frozenset({_PICKUP_VOCAB.index("on(a0,a1)"),
                   _PICKUP_VOCAB.index("on(a1,a2)"),
                   _PICKUP_VOCAB.index("not_in_taxi(a1)")})),
    "dropoff": ActionSchema(
        "dropoff", 3, _DROPOFF_VOCAB,
        frozenset({_DROPOFF_VOCAB.index("on(a0,a2)"),
                   _DROPOFF_VOCAB.index("in_taxi(a1)")})),
}

IN_TAXI = "taxi"  # passenger-location marker


class TaxiEnv:
    """Deterministic gridworld taxi with parameterised actions.

    The state is (taxi position, passenger location), where the passenger
    is either at a named landmark or inside the taxi. Movement actions are
    bound to the taxi; pickup and dropoff take any ordered binding of
    three distinct objects, and their success is decided by evaluating the
    schema's precondition conjunction on the grounded predicate vector.
    Failed actions leave the state unchanged and observe label 0. Rewards
    are all zero: the teaching problem is the preconditions.
    """

    def __init__(self, width: int = 5, height: int = 5,
                 landmarks: Mapping[str, tuple[int, int]] | None = None,
                 taxi_start: tuple[int, int] = (2, 2),
                 passenger_start: str = "L0",
                 destination: str = "L1",
                 preconditions: Mapping[str, Iterable[int]] | None = None):
        if width < 2 or height < 2:
            raise ValueError("the grid must be at least 2x2")
        self.width = width
        self.height = height
        self.landmarks = dict(landmarks) if landmarks is not None else {
            "L0": (0, 0), "L1": (width - 1, height - 1)}
        for name, (x, y) in self.landmarks.items():
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(f"landmark {name} lies outside the grid")
        if len(set(self.landmarks.values())) != len(self.landmarks):
            raise ValueError("landmarks must occupy distinct cells")
        if passenger_start not in self.landmarks or destination not in self.landmarks:
            raise ValueError("passenger_start and destination must be landmarks")
        self.destination = destination
        self.start_state = (taxi_start, passenger_start)
        self.deterministic = True
        self.objects = ("taxi", "passenger") + tuple(sorted(self.landmarks))
        schemas = dict(_DEFAULT_SCHEMAS)
        if preconditions:
            for name, relevant in preconditions.items():
                base = schemas[name]
                schemas[name] = ActionSchema(
                    base.name, base.arity, base.vocabulary,
                    frozenset(int(i) for i in relevant))
        self.schemas = schemas
        self._grounded: tuple[GroundedAction, ...] = self._build_grounded()
        self._ground_cache: dict = {}
        self._transition_cache: dict = {}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaxiEnv":
        kwargs = {}
        if "width" in d:
            kwargs["width"] = int(d["width"])
        if "height" in d:
            kwargs["height"] = int(d["height"])
        if "landmarks" in d:
            kwargs["landmarks"] = {k: tuple(v) for k, v in d["landmarks"].items()}
        if "taxi_start" in d:
            kwargs["taxi_start"] = tuple(d["taxi_start"])
        if "passenger_start" in d:
            kwargs["passenger_start"] = d["passenger_start"]
        if "destination" in d:
            kwargs["destination"] = d["destination"]
        if "preconditions" in d:
            kwargs["preconditions"] = {k: list(v) for k, v in d["preconditions"].items()}
        return cls(**kwargs)

    def _build_grounded(self) -> tuple[GroundedAction, ...]:
        grounded: list[GroundedAction] = []
        for name in ("up", "down", "left", "right"):
            grounded.append((name, ("taxi",)))
        for name in ("pickup", "dropoff"):
            for binding in itertools.permutations(self.objects, 3):
                grounded.append((name, binding))
        return tuple(grounded)

    def actions(self, state) -> tuple[GroundedAction, ...]:
        return self._grounded

    def reward(self, state, action) -> float:
        return 0.0

    # -- predicate grounding

    def _position(self, obj: str, state) -> tuple[int, int]:
        (taxi_pos, passenger_loc) = state
        if obj == "taxi":
            return taxi_pos
        if obj == "passenger":
            return taxi_pos if passenger_loc == IN_TAXI else self.landmarks[passenger_loc]
        return self.landmarks[obj]

    def _in_taxi(self, obj: str, state) -> bool:
        return obj == "passenger" and state[1] == IN_TAXI

    def ground(self, state, schema_name: str,
               binding: Sequence[str]) -> GroundedInstance:
        """Evaluate the schema's predicate vocabulary under the binding."""
        binding = tuple(binding)
        cached = self._ground_cache.get((state, schema_name, binding))
        if cached is not None:
            return cached
        instance = self._ground(state, schema_name, binding)
        self._ground_cache[(state, schema_name, binding)] = instance
        return instance

    def _ground(self, state, schema_name: str,
                binding: tuple[str, ...]) -> GroundedInstance:
        schema = self.schemas[schema_name]
        if len(binding) != schema.arity:
            raise ValueError(
                f"{schema_name} takes {schema.arity} arguments, got {len(binding)}")
        for obj in binding:
            if obj not in self.objects:
                raise ValueError(f"unknown object {obj!r}")
        pos = {f"a{i}": self._position(obj, state) for i, obj in enumerate(binding)}
        vector: list[int] = []
        for pred in schema.vocabulary:
            name, args = pred[:-1].split("(")
            slots = args.split(",")
            if name.startswith(("wall_", "clear_")):
                kind, side = name.split("_")
                x, y = pos[slots[0]]
                wall = {"north": y == self.height - 1, "south": y == 0,
                        "east": x == self.width - 1, "west": x == 0}[side]
                vector.append(int(wall if kind == "wall" else not wall))
            elif name == "on":
                vector.append(int(pos[slots[0]] == pos[slots[1]]))
            elif name == "in_taxi":
                obj = binding[int(slots[0][1:])]
                vector.append(int(self._in_taxi(obj, state)))
            elif name == "not_in_taxi":
                obj = binding[int(slots[0][1:])]
                vector.append(int(not self._in_taxi(obj, state)))
            else:  # pragma: no cover - vocabulary is fixed above
                raise ValueError(f"unknown predicate {pred!r}")
        return GroundedInstance(schema_name, binding, tuple(vector))

    def precondition_holds(self, state, schema_name: str,
                           binding: Sequence[str]) -> bool:
        instance = self.ground(state, schema_name, binding)
        schema = self.schemas[schema_name]
        return all(instance.vector[i] == 1 for i in schema.relevant)

    def observation(self, state, action: GroundedAction) -> int:
        """Success/failure label of executing the grounded action."""
        name, binding = action
        return int(self.precondition_holds(state, name, binding))

    def true_preconditions(self, names: Iterable[str] | None = None
                           ) -> dict[str, MonotoneConjunction]:
        names = tuple(names) if names is not None else tuple(self.schemas)
        return {n: self.schemas[n].precondition() for n in names}

    # -- dynamics

    def transition(self, state, action: GroundedAction) -> dict:
        cached = self._transition_cache.get((state, action))
        if cached is not None:
            return cached
        dist = self._transition(state, action)
        self._transition_cache[(state, action)] = dist
        return dist

    def _transition(self, state, action: GroundedAction) -> dict:
        name, binding = action
        if not self.precondition_holds(state, name, binding):
            return {state: 1.0}
        (taxi_pos, passenger_loc) = state
        if name in _DIRS:
            dx, dy = _DIRS[name]
            nxt = ((taxi_pos[0] + dx, taxi_pos[1] + dy), passenger_loc)
            return {nxt: 1.0}
        if name == "pickup":
            if passenger_loc != IN_TAXI and self.landmarks[passenger_loc] == taxi_pos:
                return {(taxi_pos, IN_TAXI): 1.0}
            return {state: 1.0}
        if name == "dropoff":
            if passenger_loc == IN_TAXI:
                at = [n for n, p in self.landmarks.items() if p == taxi_pos]
                if at:
                    return {(taxi_pos, at[0]): 1.0}
            return {state: 1.0}
        raise ValueError(f"unknown action {action!r}")


def ground_predicates(env: TaxiEnv, state, schema_name: str,
                      binding: Sequence[str]) -> GroundedInstance:
    """Grounded predicate vector for the binding; argument order matters,
    so swapped bindings generally give distinct vectors."""
    return env.ground(state, schema_name, binding)


def env_from_config(path: str):
    """Load an environment from a JSON config file with a ``kind`` field
    of ``bitflip`` or ``taxi``; the remaining fields mirror the
    corresponding ``from_dict`` loader."""
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind == "bitflip":
        return BitflipEnv.from_dict(d)
    if kind == "taxi":
        return TaxiEnv.from_dict(d)
    raise ValueError(f"unknown environment kind {kind!r}")
