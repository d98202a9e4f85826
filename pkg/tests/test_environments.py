import json

import pytest

from teachsim.core import RandomSource
from teachsim.environments import (
    BitflipEnv,
    Mdp,
    TaxiEnv,
    TransitionExperience,
    TruncationError,
    enumerate_reachable,
    env_from_config,
    ground_predicates,
    step,
)


class TestBitflipEnv:
    def test_flip0_sets_bit(self):
        env = BitflipEnv(4, (1.0, 1.0, 1.0, 1.0))
        nxt, reward, obs = step(env, (0, 0, 0, 0), "flip0")
        assert nxt == (1, 0, 0, 0)
        assert reward == 0.0

    def test_flip0_toggles_back(self):
        env = BitflipEnv(3, (1.0, 1.0, 1.0))
        nxt, _, _ = step(env, (1, 1, 0), "flip0")
        assert nxt == (0, 1, 0)

    def test_shift_matching_neighbour_leaves_bit(self):
        env = BitflipEnv(3, (1.0, 0.5, 0.5))
        # bits 1 and 2 match their left neighbours, so only bit 0 moves
        dist = env.transition((1, 1, 1), "shift")
        for state in dist:
            assert state[1] == 1 and state[2] == 1

    def test_shift_distribution(self):
        env = BitflipEnv(2, (1.0, 0.25))
        dist = env.transition((1, 0), "shift")
        assert dist == {(0, 1): 0.25, (0, 0): 0.75}

    def test_deterministic_flag(self):
        assert BitflipEnv(2, (1.0, 1.0)).deterministic
        assert not BitflipEnv(2, (1.0, 0.5)).deterministic

    def test_all_states_reachable_n3(self):
        env = BitflipEnv(3, (1.0, 0.5, 0.5))
        reach = enumerate_reachable(env)
        states = {env.start_state} | {e.next_state for e in reach}
        assert len(states) == 8

    def test_ones_persist_under_goal_seeking_policy(self):
        # under the all-ones-seeking policy (flip when bit 0 is clear,
        # else shift), a bit above position 0 never drops back to 0
        env = BitflipEnv(6, (1.0, 1.0, 0.5, 1.0, 0.5, 1.0))
        rng = RandomSource(31, 1)
        for episode in range(30):
            state = env.start_state
            seen_one = [False] * env.n
            for _ in range(60):
                action = "flip0" if state[0] == 0 else "shift"
                nxt, _, _ = step(env, state, action, rng)
                for i in range(1, env.n):
                    if seen_one[i]:
                        assert nxt[i] == 1
                    seen_one[i] = seen_one[i] or nxt[i] == 1
                state = nxt

    def test_from_dict(self):
        env = BitflipEnv.from_dict(
            {"bits": 4, "stochastic_bits": [2], "stochastic_success": 0.3})
        assert env.shift_success == (1.0, 1.0, 0.3, 1.0)


class TestEnumerateReachable:
    def test_horizon_zero_only_start_transitions(self):
        env = BitflipEnv(3, (1.0, 1.0, 1.0))
        reach = enumerate_reachable(env, horizon=0)
        assert {e.state for e in reach} == {env.start_state}

    def test_closure_is_closed(self):
        env = BitflipEnv(3, (1.0, 0.5, 1.0))
        reach = enumerate_reachable(env)
        sources = {e.state for e in reach}
        for e in reach:
            assert e.next_state in sources

    def test_idempotent(self):
        env = TaxiEnv()
        assert enumerate_reachable(env) == enumerate_reachable(env)

    def test_truncation_guard(self):
        env = BitflipEnv(8, (1.0,) * 8)
        with pytest.raises(TruncationError):
            enumerate_reachable(env, max_states=10)


class TestMdp:
    def test_rejects_invalid_rows(self):
        with pytest.raises(ValueError):
            Mdp({("a", "go"): {"b": 0.6}}, None, "a")

    def test_deterministic_requires_point_mass(self):
        with pytest.raises(ValueError):
            Mdp({("a", "go"): {"a": 0.5, "b": 0.5}}, None, "a",
                deterministic=True)

    def test_basic_accessors(self):
        m = Mdp({("a", "go"): {"b": 1.0}, ("b", "go"): {"a": 1.0}},
                {("a", "go"): 2.0}, "a")
        assert m.deterministic
        assert m.actions("a") == ("go",)
        assert m.reward("a", "go") == 2.0
        assert m.reward("b", "go") == 0.0


class TestTaxiGeometry:
    def setup_method(self):
        self.env = TaxiEnv()

    def test_start_state(self):
        assert self.env.start_state == ((2, 2), "L0")

    def test_west_wall_predicates(self):
        state = ((0, 2), "L0")
        inst = ground_predicates(self.env, state, "left", ("taxi",))
        vocab = self.env.schemas["left"].vocabulary
        assert inst.vector[vocab.index("wall_west(a0)")] == 1
        assert inst.vector[vocab.index("clear_west(a0)")] == 0

    def test_on_predicate_colocated(self):
        state = ((0, 0), "L0")  # taxi parked on the passenger's landmark
        inst = ground_predicates(self.env, state, "pickup",
                                 ("taxi", "passenger", "L0"))
        vocab = self.env.schemas["pickup"].vocabulary
        assert inst.vector[vocab.index("on(a0,a1)")] == 1
        assert inst.vector[vocab.index("on(a1,a2)")] == 1
        assert inst.vector[vocab.index("not_in_taxi(a1)")] == 1

    def test_swapped_binding_differs(self):
        # taxi at the empty landmark: swapping passenger and landmark
        # arguments changes the co-location pattern
        state = ((4, 4), "L0")
        canonical = ground_predicates(self.env, state, "pickup",
                                      ("taxi", "passenger", "L1"))
        swapped = ground_predicates(self.env, state, "pickup",
                                    ("taxi", "L1", "passenger"))
        assert canonical.vector != swapped.vector

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            ground_predicates(self.env, self.env.start_state, "pickup",
                              ("taxi", "passenger"))


class TestTaxiDynamics:
    def setup_method(self):
        self.env = TaxiEnv()

    def test_failed_pickup_is_noop_with_label_zero(self):
        state = ((2, 2), "L0")  # taxi away from the passenger
        action = ("pickup", ("taxi", "passenger", "L0"))
        nxt, reward, obs = step(self.env, state, action)
        assert nxt == state
        assert obs == 0

    def test_successful_pickup(self):
        state = ((0, 0), "L0")
        action = ("pickup", ("taxi", "passenger", "L0"))
        nxt, _, obs = step(self.env, state, action)
        assert obs == 1
        assert nxt == ((0, 0), "taxi")

    def test_movement_blocked_at_wall(self):
        state = ((0, 0), "L0")
        nxt, _, obs = step(self.env, state, ("down", ("taxi",)))
        assert nxt == state and obs == 0
        nxt, _, obs = step(self.env, state, ("up", ("taxi",)))
        assert nxt == ((0, 1), "L0") and obs == 1

    def test_dropoff_cycle(self):
        state = ((0, 0), "L0")
        state, _, _ = step(self.env, state, ("pickup", ("taxi", "passenger", "L0")))
        assert state == ((0, 0), "taxi")
        for move in ("up",) * 4 + ("right",) * 4:
            state, _, obs = step(self.env, state, (move, ("taxi",)))
            assert obs == 1
        state, _, obs = step(self.env, state, ("dropoff", ("taxi", "passenger", "L1")))
        assert obs == 1
        assert state == ((4, 4), "L1")

    def test_all_cells_reachable(self):
        reach = enumerate_reachable(self.env)
        cells = {e.next_state[0] for e in reach}
        assert cells == {(x, y) for x in range(5) for y in range(5)}

    def test_manhattan_distance_center_to_corner(self):
        from teachsim.mdp_teaching import shortest_path_deterministic
        plan = shortest_path_deterministic(
            self.env, ((2, 2), "L0"), lambda s: s[0] == (0, 0))
        assert plan.expected_length == 4


class TestEnvConfig:
    def test_bitflip_config_file(self, tmp_path):
        path = tmp_path / "env.json"
        path.write_text(json.dumps(
            {"kind": "bitflip", "bits": 3, "shift_success": [1.0, 0.5, 1.0]}))
        env = env_from_config(str(path))
        assert isinstance(env, BitflipEnv)
        assert env.shift_success == (1.0, 0.5, 1.0)

    def test_taxi_config_file(self, tmp_path):
        path = tmp_path / "env.json"
        path.write_text(json.dumps(
            {"kind": "taxi", "width": 5, "height": 5,
             "landmarks": {"L0": [0, 0], "L1": [4, 4]},
             "taxi_start": [1, 1]}))
        env = env_from_config(str(path))
        assert isinstance(env, TaxiEnv)
        assert env.start_state == ((1, 1), "L0")

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "env.json"
        path.write_text(json.dumps({"kind": "gridworld"}))
        with pytest.raises(ValueError):
            env_from_config(str(path))

    def test_custom_preconditions(self):
        vocab = TaxiEnv().schemas["up"].vocabulary
        custom = TaxiEnv(preconditions={
            "up": [vocab.index("clear_north(a0)"), vocab.index("wall_south(a0)")]})
        # up now also requires a wall to the south: only legal on the
        # bottom row
        assert custom.precondition_holds(((2, 0), "L0"), "up", ("taxi",))
        assert not custom.precondition_holds(((2, 1), "L0"), "up", ("taxi",))
