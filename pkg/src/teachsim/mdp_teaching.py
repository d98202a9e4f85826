"""Heuristic teaching inside an MDP: greedy construction of a teaching
set from the reachable transitions, then a nearest-first tour that
demonstrates each target until its visit count or stop rule is met.
Also houses the sequential coin-direction teacher/learner pair, where the
visible ordering of the teacher's choices licenses stronger inference."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .concepts import (
    BernoulliConcept,
    DbnConcept,
    FactorEstimate,
    MonotoneConjunction,
    VersionSpace,
)
from .core import AccuracyParams, RandomSource, hoeffding_samples
from .environments import (
    SequenceStep,
    TaxiEnv,
    TeachingSequence,
    TransitionExperience,
    enumerate_reachable,
    step,
)
from .teachers import BitflipProbePlan

PROTOCOLS = ("td", "ntd-par", "nstd-par", "nstd-ind")


class UnteachableError(ValueError):
    """Some parameter of the concept is exercised by no reachable
    transition, so no teaching set exists in this environment."""


class UnreachableTargetError(ValueError):
    """A teaching target cannot be reached from the current state."""


@dataclass(frozen=True)
class PathPlan:
    """Planned route to a target: the action sequence (deterministic
    environments) and its expected length."""

    actions: tuple
    expected_length: float


@dataclass
class ExpectedStepsPlan:
    """Expected steps-to-target and the greedy action, per state. States
    from which the target is not almost-surely reachable keep an infinite
    value and no action."""

    values: dict
    policy: dict
    converged: bool


@dataclass(frozen=True)
class TeachingTarget:
    """One (state, action) demonstration and what it teaches.

    Deterministic facts use ``required_visits``; noisy conditions instead
    carry the conditions whose empirical means must enter the stop band,
    with ``cap`` bounding the visits.
    """

    state: object
    action: object
    covers: frozenset
    required_visits: int | None = None
    conditions: tuple = ()
    half_width: float | None = None
    cap: int | None = None


def _encode(value) -> str:
    return repr(value)


# ---------------------------------------------------------------------------
# planning primitives


def shortest_path_deterministic(env, start, goal) -> PathPlan:
    """Breadth-first shortest action sequence from ``start`` to any state
    satisfying ``goal`` (a predicate, or a state compared by equality)."""
    if not env.deterministic:
        raise ValueError("breadth-first planning requires a deterministic environment")
    goal_pred = goal if callable(goal) else (lambda s, g=goal: s == g)
    if goal_pred(start):
        return PathPlan((), 0.0)
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a in env.actions(s):
            (s2,) = env.transition(s, a)
            if s2 in parent:
                continue
            parent[s2] = (s, a)
            if goal_pred(s2):
                actions: list = []
                node = s2
                while parent[node] is not None:
                    prev, act = parent[node]
                    actions.append(act)
                    node = prev
                actions.reverse()
                return PathPlan(tuple(actions), float(len(actions)))
            queue.append(s2)
    raise UnreachableTargetError(f"no path reaches the goal from {start!r}")


def expected_steps_planner(env, goal, states: Iterable | None = None,
                           tol: float = 1e-9,
                           max_iter: int = 10**6) -> ExpectedStepsPlan:
    """Value iteration on expected steps-to-hit the goal set.

    V is 0 on goal states and otherwise min over actions of
    1 + sum_s' T(s'|s,a) V(s'), iterated to a sup-norm residual below
    ``tol``. States with no positive-probability path to the goal are
    flagged unreachable (infinite value) up front; states whose value is
    still moving after ``max_iter`` sweeps leave the plan marked
    unconverged.
    """
    goal_pred = goal if callable(goal) else (lambda s, g=goal: s == g)
    if states is None:
        reach = enumerate_reachable(env)
        state_set = {env.start_state}
        for exp in reach:
            state_set.add(exp.state)
            state_set.add(exp.next_state)
    else:
        state_set = set(states)
    ordered = sorted(state_set, key=_encode)
    index = {s: i for i, s in enumerate(ordered)}
    target_mask = np.array([goal_pred(s) for s in ordered])
    if not target_mask.any():
        raise UnreachableTargetError("no state satisfies the goal predicate")
    target_idx = int(np.argmax(target_mask))

    rows = {s: [(a, env.transition(s, a)) for a in env.actions(s)]
            for s in ordered if not goal_pred(s)}

    # prune states with no positive-probability path to the goal
    preds: dict[int, set[int]] = {}
    for s, acts in rows.items():
        for _, dist in acts:
            for s2 in dist:
                preds.setdefault(index[s2], set()).add(index[s])
    alive = {i for i, flagged in enumerate(target_mask) if flagged}
    stack = list(alive)
    while stack:
        for p in preds.get(stack.pop(), ()):
            if p not in alive:
                alive.add(p)
                stack.append(p)

    # one padded (next-state, probability) table per action over the
    # states where it is available; padding points at a goal state with
    # probability 0 so gathered values stay finite
    action_order = sorted({a for acts in rows.values() for a, _ in acts}, key=_encode)
    tables: list = []
    for a in action_order:
        entries = []
        for s, acts in rows.items():
            if index[s] not in alive:
                continue
            for act, dist in acts:
                if act == a:
                    entries.append((index[s], dist))
        if not entries:
            tables.append(None)
            continue
        width = max(len(d) for _, d in entries)
        rows_idx = np.array([i for i, _ in entries], dtype=np.int64)
        sup_idx = np.full((len(entries), width), target_idx, dtype=np.int64)
        sup_p = np.zeros((len(entries), width))
        for r, (_, dist) in enumerate(entries):
            for c, (s2, p) in enumerate(sorted(dist.items(), key=lambda kv: _encode(kv[0]))):
                sup_idx[r, c] = index[s2]
                sup_p[r, c] = p
        tables.append((rows_idx, sup_idx, sup_p))

    n = len(ordered)
    values = np.full(n, np.inf)
    values[list(alive)] = 0.0
    values[target_mask] = 0.0
    converged = not (alive - {i for i, f in enumerate(target_mask) if f})
    for _ in range(max_iter):
        cand = np.full((len(action_order), n), np.inf)
        for a_i, table in enumerate(tables):
            if table is None:
                continue
            rows_idx, sup_idx, sup_p = table
            cand[a_i, rows_idx] = 1.0 + (sup_p * values[sup_idx]).sum(axis=1)
        new = np.min(cand, axis=0) if len(action_order) else values.copy()
        new[target_mask] = 0.0
        dead = np.ones(n, dtype=bool)
        dead[list(alive)] = False
        new[dead] = np.inf
        both_inf = np.isinf(new) & np.isinf(values)
        with np.errstate(invalid="ignore"):
            diff = np.abs(new - values)
        residual = float(np.max(np.where(both_inf, 0.0, diff)))
        values = new
        if residual < tol:
            converged = True
            break

    policy: dict = {}
    cand = np.full((len(action_order), n), np.inf)
    for a_i, table in enumerate(tables):
        if table is None:
            continue
        rows_idx, sup_idx, sup_p = table
        cand[a_i, rows_idx] = 1.0 + (sup_p * values[sup_idx]).sum(axis=1)
    for s in ordered:
        i = index[s]
        if target_mask[i] or np.isinf(values[i]):
            continue
        policy[s] = action_order[int(np.argmin(cand[:, i]))]
    value_map = {s: float(values[index[s]]) for s in ordered}
    return ExpectedStepsPlan(values=value_map, policy=policy, converged=converged)


def greedy_set_cover(required: Iterable, candidates: Sequence[tuple],
                     key: Callable = _encode) -> list:
    """Greedy cover: repeatedly pick the candidate covering the most
    still-uncovered items. ``candidates`` is a sequence of (item, covers)
    pairs; ties go to the smallest encoding, so builds are deterministic
    and can be re-simulated by a learner. Raises
    :class:`UnteachableError` when something is coverable by no candidate.
    """
    remaining = set(required)
    coverable: set = set()
    for _, covers in candidates:
        coverable |= covers
    orphans = remaining - coverable
    if orphans:
        raise UnteachableError(
            f"no candidate covers: {sorted(orphans, key=_encode)!r}")
    ranked = sorted(candidates, key=lambda ic: key(ic[0]))
    chosen = []
    while remaining:
        best_item, best_covers, best_gain = None, None, 0
        for item, covers in ranked:
            gain = len(covers & remaining)
            if gain > best_gain:
                best_item, best_covers, best_gain = item, covers, gain
        chosen.append(best_item)
        remaining -= best_covers
    return chosen


def greedy_visit_order(env, start, target_states: Sequence) -> tuple[list, float]:
    """Nearest-first visiting order over target states in a deterministic
    environment. Returns (order, total planned path length); used both by
    the teaching tour and as a standalone touring heuristic."""
    pending = list(target_states)
    order: list = []
    total = 0.0
    current = start
    while pending:
        best = None
        for t in sorted(pending, key=_encode):
            plan = shortest_path_deterministic(env, current, t)
            if best is None or plan.expected_length < best[1]:
                best = (t, plan.expected_length)
        target, dist = best
        order.append(target)
        total += dist
        pending.remove(target)
        current = target
    return order, total


# ---------------------------------------------------------------------------
# teaching-set construction


def _conjunction_cover_targets(concept: Mapping[str, MonotoneConjunction],
                               reachable: Sequence[TransitionExperience],
                               env: TaxiEnv) -> list[TeachingTarget]:
    """Greedy teaching set for action preconditions: positives that
    between them zero out every irrelevant predicate, plus one failure per
    relevant predicate that isolates it (every other relevant predicate
    held true)."""
    universe: set = set()
    for name, conj in concept.items():
        relevant = conj.relevant
        irrelevant = set(range(conj.n)) - relevant
        universe.add(("pos", name))
        universe.update(("dispel", name, j) for j in irrelevant)
        universe.update(("iso", name, i) for i in relevant)

    candidates: list[tuple] = []
    seen: set = set()
    for exp in reachable:
        name, binding = exp.action
        if name not in concept:
            continue
        if (exp.state, exp.action) in seen:
            continue
        seen.add((exp.state, exp.action))
        conj = concept[name]
        vector = env.ground(exp.state, name, binding).vector
        label = env.observation(exp.state, exp.action)
        covers: set = set()
        if label == 1:
            covers.add(("pos", name))
            for j in range(conj.n):
                if j not in conj.relevant and vector[j] == 0:
                    covers.add(("dispel", name, j))
        else:
            zero_relevant = {i for i in conj.relevant if vector[i] == 0}
            if len(zero_relevant) == 1:
                covers.add(("iso", name, next(iter(zero_relevant))))
        if covers:
            candidates.append(((exp.state, exp.action), frozenset(covers)))

    chosen = greedy_set_cover(universe, candidates)
    cover_of = dict(candidates)
    return [TeachingTarget(state=s, action=a, covers=cover_of[(s, a)],
                           required_visits=1)
            for (s, a) in chosen]


def _dbn_identifying(concept: DbnConcept, plan: BitflipProbePlan,
                     state) -> dict[int, tuple[int, ...]]:
    """Factors whose shift parameter the state pins down, with the parent
    assignment it exposes them at."""
    out: dict[int, tuple[int, ...]] = {}
    for i in range(concept.n):
        a = concept.parent_values(i, state)
        if plan.identifies(concept, i, a):
            out[i] = a
    return out


def _dbn_cover_targets(concept: DbnConcept,
                       reachable: Sequence[TransitionExperience],
                       protocol: str,
                       params: AccuracyParams) -> list[TeachingTarget]:
    plan = BitflipProbePlan()
    plan.validate(concept)
    n = concept.n
    cap = hoeffding_samples(
        AccuracyParams(params.epsilon / n, params.delta / n**concept.k_par))
    band = params.epsilon / (2.0 * n)

    shift_states = sorted({exp.state for exp in reachable if exp.action == "shift"},
                          key=_encode)
    exposures = {s: _dbn_identifying(concept, plan, s) for s in shift_states}
    required = set(range(n))

    if protocol in ("ntd-par", "nstd-par"):
        candidates = [(s, frozenset(exposures[s])) for s in shift_states]
        chosen = greedy_set_cover(required, candidates)
        targets = []
        for s in chosen:
            conds = tuple(sorted(exposures[s].items()))
            if protocol == "ntd-par":
                targets.append(TeachingTarget(
                    state=s, action="shift", covers=frozenset(exposures[s]),
                    required_visits=cap))
            else:
                targets.append(TeachingTarget(
                    state=s, action="shift", covers=frozenset(exposures[s]),
                    conditions=conds, half_width=band, cap=cap))
        return targets

    # nstd-ind: one target per factor, in the state that exposes it while
    # exposing as few other stochastic factors as possible
    def stochastic(i: int) -> bool:
        return any(q not in (0.0, 1.0) for q in concept.cpt[i].values())

    targets = []
    for i in range(n):
        best = None
        for s in shift_states:
            if i not in exposures[s]:
                continue
            others = sum(1 for j in exposures[s] if j != i and stochastic(j))
            rank = (others, len(exposures[s]), _encode(s))
            if best is None or rank < best[0]:
                best = (rank, s)
        if best is None:
            raise UnteachableError(f"factor {i} is exercised by no reachable shift")
        s = best[1]
        targets.append(TeachingTarget(
            state=s, action="shift", covers=frozenset({i}),
            conditions=((i, exposures[s][i]),), half_width=band, cap=cap))
    return targets


def build_teaching_set_greedy(concept, reachable: Sequence[TransitionExperience],
                              protocol: str, env,
                              params: AccuracyParams | None = None
                              ) -> list[TeachingTarget]:
    """Greedy teaching-set construction over the reachable transitions.

    Precondition concepts (a mapping of schema name to conjunction) use
    the positive/isolating-failure cover under the ``td`` protocol; DBN
    concepts use identifying-state covers with visit counts or stop rules
    according to the noisy protocol.
    """
    protocol = protocol.strip().lower()
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    if isinstance(concept, Mapping):
        if protocol != "td":
            raise ValueError("precondition concepts use the td protocol")
        return _conjunction_cover_targets(concept, reachable, env)
    if isinstance(concept, DbnConcept):
        if protocol == "td":
            raise ValueError("DBN concepts use a noisy protocol")
        if params is None:
            raise ValueError("noisy protocols need accuracy parameters")
        return _dbn_cover_targets(concept, reachable, protocol, params)
    raise TypeError(f"cannot build a teaching set for {type(concept).__name__}")


# ---------------------------------------------------------------------------
# the touring teacher


class _DbnEstimates:
    """Condition estimates shared by teacher and learner during a tour:
    every executed shift updates the estimate of each factor's exposed
    identifying assignment, wherever in the tour it happened. Samples of
    complementary assignments both pin the same shift probability, so the
    per-factor view pools them in shift-success units."""

    def __init__(self, concept: DbnConcept, plan: BitflipProbePlan):
        self.concept = concept
        self.plan = plan
        self.table: dict[tuple[int, tuple[int, ...]], FactorEstimate] = {}

    def update(self, state, action, next_state) -> None:
        if action != "shift":
            return
        for i, a in _dbn_identifying(self.concept, self.plan, state).items():
            est = self.table.get((i, a))
            if est is None:
                est = self.table[(i, a)] = FactorEstimate()
            est.observe(int(next_state[i]))

    def factor_counts(self, factor: int) -> tuple[int, int]:
        """(samples, success-equivalent count) pooled over the factor's
        identifying assignments. Under the shift-in assignment a next-bit
        1 witnesses a successful shift; under the keep-a-1 assignment
        (and factor 0's currently-set assignment) a next-bit 1 witnesses
        a failed one."""
        count = successes = 0
        for (i, a), est in self.table.items():
            if i != factor:
                continue
            count += est.count
            if (i == 0 and a == (1,)) or (i > 0 and a == (0, 1)):
                successes += est.count - est.successes
            else:
                successes += est.successes
        return count, successes

    def shift_success_prob(self, factor: int) -> float:
        if factor == 0:
            return 1.0 - self.concept.cpt[0][(1,)]
        return self.concept.cpt[factor][(1, 0)]

    def factor_in_band(self, factor: int, half_width: float) -> bool:
        count, successes = self.factor_counts(factor)
        if count == 0:
            return False
        return abs(successes / count - self.shift_success_prob(factor)) <= half_width


def _target_satisfied(target: TeachingTarget, visits: int,
                      estimates: _DbnEstimates | None) -> bool:
    """Every target must be demonstrated at least once; noisy targets then
    keep drawing visits until their pooled estimate enters the stop band
    (or the per-condition budget is spent)."""
    if target.required_visits is not None:
        return visits >= target.required_visits
    if visits < 1:
        return False
    if target.cap is not None and visits >= target.cap:
        return True
    if estimates is None:
        return False
    return all(estimates.factor_in_band(factor, target.half_width)
               for factor, _ in target.conditions)


def teach_in_mdp(concept, env, protocol: str,
                 params: AccuracyParams | None = None,
                 rng: RandomSource | None = None,
                 reachable: Sequence[TransitionExperience] | None = None,
                 planner_cache: dict | None = None,
                 max_steps: int = 10_000_000) -> TeachingSequence:
    """Demonstrate the concept inside the environment.

    Builds the greedy teaching set, then repeatedly navigates to the
    remaining target closest to the current state (breadth-first paths in
    deterministic environments, minimal expected steps otherwise) and
    executes its action until the target's visit count or stop rule is
    satisfied. Every executed action, navigation included, lands in the
    emitted sequence, so a consistent learner replays exactly what the
    teacher did.

    ``reachable`` and ``planner_cache`` let repeated runs over the same
    environment share the transition closure and the per-target planners.
    """
    if reachable is None:
        reachable = enumerate_reachable(env)
    protocol = protocol.strip().lower()
    estimates = None
    if isinstance(concept, DbnConcept):
        estimates = _DbnEstimates(concept, BitflipProbePlan())

    state_set = {env.start_state}
    for exp in reachable:
        state_set.add(exp.state)
        state_set.add(exp.next_state)

    steps: list[SequenceStep] = []
    state = env.start_state
    planners: dict = planner_cache if planner_cache is not None else {}

    def execute(action) -> None:
        nonlocal state
        nxt, r, obs = step(env, state, action, rng)
        steps.append(SequenceStep(state, action, r, obs, nxt))
        if estimates is not None:
            estimates.update(state, action, nxt)
        state = nxt
        if len(steps) > max_steps:
            raise RuntimeError(f"teaching exceeded {max_steps} steps")

    if isinstance(concept, DbnConcept) and protocol in ("ntd-par", "nstd-par"):
        _parallel_drive(concept, env, protocol, params, state_set, planners,
                        estimates, execute, lambda: state)
        return TeachingSequence(steps=tuple(steps), final_state=state)

    targets = build_teaching_set_greedy(concept, reachable, protocol, env, params)
    visits = {id(t): 0 for t in targets}

    def distance_to(target: TeachingTarget) -> float:
        if env.deterministic:
            return shortest_path_deterministic(env, state, target.state).expected_length
        plan = planners.get(target.state)
        if plan is None:
            plan = planners[target.state] = expected_steps_planner(
                env, target.state, states=state_set)
        value = 0.0 if state == target.state else plan.values.get(state, float("inf"))
        if value == float("inf"):
            raise UnreachableTargetError(f"target {target.state!r} unreachable")
        return value

    pending = list(targets)
    while pending:
        pending = [t for t in pending
                   if not _target_satisfied(t, visits[id(t)], estimates)]
        if not pending:
            break
        ranked = sorted(pending, key=lambda t: (_encode(t.state), _encode(t.action)))
        target = min(ranked, key=distance_to)
        if env.deterministic:
            for action in shortest_path_deterministic(env, state, target.state).actions:
                execute(action)
        else:
            plan = planners[target.state]
            while state != target.state:
                execute(plan.policy[state])
        execute(target.action)
        visits[id(target)] += 1
        if _target_satisfied(target, visits[id(target)], estimates):
            pending.remove(target)
    return TeachingSequence(steps=tuple(steps), final_state=state)


def _parallel_drive(concept: DbnConcept, env, protocol: str,
                    params: AccuracyParams, state_set: set, planners: dict,
                    estimates: _DbnEstimates, execute, current_state) -> None:
    """Tour loop for the parallel protocols: every probe is a shift taken
    from the nearest state that exposes every still-unsatisfied factor.

    Navigating to one fixed full-coverage state would cost an expected
    path through every stochastic gate per probe; once only a few factors
    remain needy, many nearby states expose all of them, so the parallel
    teachers keep probing at a few steps per sample. The fixed-budget
    variant needs one sample per deterministic factor and the Hoeffding
    budget per stochastic one; the stopping variant instead waits for
    every factor's pooled estimate to enter the epsilon/(2n) band.
    """
    if params is None:
        raise ValueError("noisy protocols need accuracy parameters")
    plan = BitflipProbePlan()
    plan.validate(concept)
    n = concept.n
    cap = hoeffding_samples(
        AccuracyParams(params.epsilon / n, params.delta / n**concept.k_par))
    band = params.epsilon / (2.0 * n)

    exposure = planners.get(("exposures",))
    if exposure is None:
        exposure = {s: frozenset(_dbn_identifying(concept, plan, s))
                    for s in state_set}
        planners[("exposures",)] = exposure
    coverable = frozenset().union(*exposure.values()) if exposure else frozenset()
    missing = set(range(n)) - coverable
    if missing:
        raise UnteachableError(f"factors never exercised: {sorted(missing)!r}")

    def deterministic_factor(i: int) -> bool:
        return estimates.shift_success_prob(i) in (0.0, 1.0)

    def satisfied(i: int) -> bool:
        count, _ = estimates.factor_counts(i)
        if count >= cap:
            return True
        if protocol == "ntd-par":
            return count >= (1 if deterministic_factor(i) else cap)
        return estimates.factor_in_band(i, band)

    guard = 0
    while True:
        # the stop test runs after every action: navigation shifts sample
        # exposed conditions too, so they count like any other pull
        needed = frozenset(i for i in range(n) if not satisfied(i))
        if not needed:
            return
        s = current_state()
        if needed <= exposure[s]:
            execute("shift")
        else:
            key = ("expose", needed)
            nav = planners.get(key)
            if nav is None:
                goal = lambda st, req=needed: req <= exposure.get(st, frozenset())
                nav = planners[key] = expected_steps_planner(env, goal,
                                                             states=state_set)
            if nav.values.get(s, float("inf")) == float("inf"):
                raise UnreachableTargetError(
                    f"no reachable state exposes factors {sorted(needed)!r}")
            execute(nav.policy[s])
        guard += 1
        if guard > 100 * cap * (n + 1) + n:
            raise RuntimeError("parallel drive failed to satisfy its stop rule")


# ---------------------------------------------------------------------------
# Taxi teachers and learners


def taxi_std_approx_teacher(env: TaxiEnv, action_set: Iterable[str]
                            ) -> TeachingSequence:
    """Positives-only teaching for action preconditions, for a learner
    that simulates the teacher: show the most specific success available,
    then successes that between them zero out every remaining irrelevant
    predicate, and stop. Failures are never shown; the learner infers that
    everything never dispelled is relevant."""
    names = list(action_set)
    reachable = enumerate_reachable(env)
    successes: dict[str, list[tuple]] = {name: [] for name in names}
    seen: set = set()
    for exp in reachable:
        name, binding = exp.action
        if name not in successes or (exp.state, exp.action) in seen:
            continue
        seen.add((exp.state, exp.action))
        if env.observation(exp.state, exp.action) == 1:
            vector = env.ground(exp.state, name, binding).vector
            successes[name].append(((exp.state, exp.action), vector))

    targets: list[TeachingTarget] = []
    for name in names:
        conj = env.schemas[name].precondition()
        irrelevant = set(range(conj.n)) - conj.relevant
        pool = sorted(successes[name], key=lambda sv: _encode(sv[0]))
        if not pool:
            raise UnteachableError(f"no reachable success for {name!r}")
        most_specific = min(
            pool, key=lambda sv: (sum(sv[1][j] for j in irrelevant), _encode(sv[0])))
        chosen = [most_specific]
        remaining = {j for j in irrelevant if most_specific[1][j] == 1}
        while remaining:
            best, best_gain = None, 0
            for sv in pool:
                gain = sum(1 for j in remaining if sv[1][j] == 0)
                if gain > best_gain:
                    best, best_gain = sv, gain
            if best is None:
                raise UnteachableError(
                    f"irrelevant predicates of {name!r} cannot all be dispelled: "
                    f"{sorted(remaining)!r}")
            chosen.append(best)
            remaining -= {j for j in remaining if best[1][j] == 0}
        for (s, a), _ in chosen:
            targets.append(TeachingTarget(state=s, action=a,
                                          covers=frozenset(), required_visits=1))

    steps: list[SequenceStep] = []
    state = env.start_state
    pending = list(targets)
    while pending:
        ranked = sorted(pending, key=lambda t: (_encode(t.state), _encode(t.action)))
        target = min(ranked, key=lambda t: shortest_path_deterministic(
            env, state, t.state).expected_length)
        for action in shortest_path_deterministic(env, state, target.state).actions:
            nxt, r, obs = step(env, state, action)
            steps.append(SequenceStep(state, action, r, obs, nxt))
            state = nxt
        nxt, r, obs = step(env, state, target.action)
        steps.append(SequenceStep(state, target.action, r, obs, nxt))
        state = nxt
        pending.remove(target)
    return TeachingSequence(steps=tuple(steps), final_state=state)


def consistent_precondition_learner(env: TaxiEnv, sequence: TeachingSequence,
                                    names: Iterable[str]
                                    ) -> dict[str, VersionSpace]:
    """Replay a teaching sequence through one version space per schema.
    Precondition teaching is complete when each space reports taught."""
    spaces = {name: VersionSpace(len(env.schemas[name].vocabulary))
              for name in names}
    for s in sequence.steps:
        name, binding = s.action
        if name in spaces:
            vector = env.ground(s.state, name, binding).vector
            spaces[name].observe(vector, s.observation)
    return spaces


def std_precondition_learner(env: TaxiEnv, sequence: TeachingSequence,
                             names: Iterable[str]
                             ) -> dict[str, MonotoneConjunction]:
    """Inference rule paired with the positives-only teacher: once the
    teacher stops, everything still true in every shown success must be
    relevant, so the hypothesis is the intersection of the success
    vectors. Failures are a protocol violation for the taught schemas."""
    masks: dict[str, list[int] | None] = {name: None for name in names}
    for s in sequence.steps:
        name, binding = s.action
        if name not in masks:
            continue
        if s.observation != 1:
            raise ValueError(
                f"positives-only protocol saw a failed {name!r} demonstration")
        vector = env.ground(s.state, name, binding).vector
        if masks[name] is None:
            masks[name] = list(vector)
        else:
            masks[name] = [m & v for m, v in zip(masks[name], vector)]
    out: dict[str, MonotoneConjunction] = {}
    for name, mask in masks.items():
        if mask is None:
            raise ValueError(f"no demonstration of {name!r} in the sequence")
        out[name] = MonotoneConjunction(
            len(mask), frozenset(i for i, v in enumerate(mask) if v == 1))
    return out


# ---------------------------------------------------------------------------
# sequential coin direction


def nsstd_coin_infer(flips: Sequence[int]) -> str:
    """Learner half of the coin-direction protocol: a one-flip sequence
    names the bias directly; a second flip reveals that the first outcome
    contradicted the bias (otherwise the teacher would have stopped), so
    the bias is the opposite of the first outcome, whatever the second
    flip shows."""
    if len(flips) == 1:
        return "heads" if flips[0] == 1 else "tails"
    if len(flips) == 2:
        return "tails" if flips[0] == 1 else "heads"
    raise ValueError("the coin-direction protocol emits one or two flips")


def nsstd_coin_direction(c: BernoulliConcept, rng: RandomSource
                         ) -> tuple[tuple[int, ...], str]:
    """Teacher half of the coin-direction protocol: stop after the first
    flip if it matches the bias direction, otherwise flip exactly once
    more and stop regardless of the outcome. Returns the flip sequence
    and the paired learner's inference, which always names the true
    direction."""
    if c.p_star == 0.5:
        raise ValueError("a fair coin has no bias direction to teach")
    direction = "heads" if c.p_star > 0.5 else "tails"
    first = 1 if rng.random() < c.p_star else 0
    first_dir = "heads" if first == 1 else "tails"
    if first_dir == direction:
        flips: tuple[int, ...] = (first,)
    else:
        second = 1 if rng.random() < c.p_star else 0
        flips = (first, second)
    return flips, nsstd_coin_infer(flips)
