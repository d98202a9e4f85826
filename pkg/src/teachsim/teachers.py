"""Teaching strategies for the random-access (supervised) setting.

Noisy teachers build an unordered collection one sample at a time and may
issue a stop once the relevant empirical means are close enough to the
truth; their fixed-budget counterparts always deliver the full Hoeffding
budget so that any consistent learner is served.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .concepts import (
    BanditConcept,
    BernoulliConcept,
    DbnConcept,
    MonotoneConjunction,
)
from .core import (
    AccuracyParams,
    RandomSource,
    Sample,
    TeachingCollection,
    hoeffding_samples,
)

COIN_INPUT = "coin"

COIN_STRATEGIES = ("NTD", "NSTD")
BANDIT_STRATEGIES = ("NTD-IND", "NSTD-IND", "NTD-PAR", "NSTD-PAR")
DBN_STRATEGIES = ("NTD", "NSTD-PAR", "NSTD-IND")


class UnteachablePlanError(ValueError):
    """The probe plan never exercises a condition it is required to teach."""


@dataclass
class TeachingOutcome:
    """Result of one teaching episode.

    ``steps`` is the protocol's step count as plotted (individual samples,
    or parallel pulls/probes for the PAR strategies); ``samples`` is the
    total multiplicity of the delivered collection. The two coincide for
    individual strategies.
    """

    collection: TeachingCollection
    steps: int
    samples: int
    stopped_early: bool
    per_condition_steps: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StopRule:
    """Stop test for one noisy condition: the teacher may stop once the
    empirical mean is within ``half_width`` of the truth (inclusive, the
    target interval is closed), and must stop at ``cap`` samples."""

    half_width: float
    cap: int

    def __post_init__(self) -> None:
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.cap < 1:
            raise ValueError("cap must be at least 1")

    def satisfied(self, empirical_mean: float, truth: float) -> bool:
        return abs(empirical_mean - truth) <= self.half_width


def _canon(strategy: str, allowed: tuple[str, ...]) -> str:
    s = strategy.strip().upper()
    if s not in allowed:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {allowed}")
    return s


# ---------------------------------------------------------------------------
# monotone conjunctions


def teach_conjunction_td(c: MonotoneConjunction) -> list[Sample]:
    """Teaching list for any consistent learner: the most specific positive
    example (exactly the relevant variables set), then one negative per
    relevant variable with that variable alone flipped to 0."""
    positive = tuple(1 if i in c.relevant else 0 for i in range(c.n))
    samples = [Sample(positive, 1)]
    for i in sorted(c.relevant):
        x = tuple(0 if j == i else positive[j] for j in range(c.n))
        samples.append(Sample(x, 0))
    return samples


def teach_conjunction_std(c: MonotoneConjunction) -> Sample:
    """Single-example teaching for a learner that knows it has an optimal
    teacher: just the most specific positive example."""
    positive = tuple(1 if i in c.relevant else 0 for i in range(c.n))
    return Sample(positive, 1)


def std_infer(sample: Sample) -> MonotoneConjunction:
    """Inference rule paired with :func:`teach_conjunction_std`: the taught
    conjunction's relevant set is exactly the 1-bits of the positive
    example. A negative example is a protocol violation."""
    if sample.label != 1:
        raise ValueError("the single-example protocol only ever shows a positive")
    x = sample.input
    return MonotoneConjunction(len(x), frozenset(i for i, v in enumerate(x) if v == 1))


# ---------------------------------------------------------------------------
# coins


def _first_hit(cum_heads: np.ndarray, truth: float, half_width: float) -> int | None:
    """First 1-based prefix length whose mean lies within half_width of
    truth, or None if no prefix qualifies."""
    t = np.arange(1, len(cum_heads) + 1)
    hits = np.abs(cum_heads / t - truth) <= half_width
    idx = int(np.argmax(hits))
    if not hits[idx]:
        return None
    return idx + 1


def _coin_collection(heads: int, total: int) -> TeachingCollection:
    return TeachingCollection.from_counts(
        {(COIN_INPUT, 1): heads, (COIN_INPUT, 0): total - heads})


def teach_coin_ntd(c: BernoulliConcept, params: AccuracyParams,
                   rng: RandomSource) -> TeachingOutcome:
    """Flip exactly the Hoeffding budget of coins and stop. Serves any
    distribution-consistent learner, including those that refuse to
    predict before seeing the full budget."""
    m = hoeffding_samples(params)
    flips = rng.random_block(m) < c.p_star
    heads = int(np.count_nonzero(flips))
    return TeachingOutcome(
        collection=_coin_collection(heads, m),
        steps=m,
        samples=m,
        stopped_early=False,
        per_condition_steps={COIN_INPUT: m},
    )


def teach_coin_nstd(c: BernoulliConcept, params: AccuracyParams,
                    rng: RandomSource) -> TeachingOutcome:
    """Flip until the empirical mean is within epsilon/2 of the true bias
    (checked after every flip, boundary inclusive), capped at the Hoeffding
    budget. The delivered collection therefore satisfies the half-width
    bound unless the cap was hit."""
    cap = hoeffding_samples(params)
    flips = (rng.random_block(cap) < c.p_star).astype(np.int64)
    cum = np.cumsum(flips)
    hit = _first_hit(cum, c.p_star, params.epsilon / 2.0)
    t = hit if hit is not None else cap
    heads = int(cum[t - 1])
    return TeachingOutcome(
        collection=_coin_collection(heads, t),
        steps=t,
        samples=t,
        stopped_early=t < cap,
        per_condition_steps={COIN_INPUT: t},
    )


# ---------------------------------------------------------------------------
# bandits


def teach_bandit(strategy: str, c: BanditConcept, params: AccuracyParams,
                 rng: RandomSource,
                 order: Sequence[int] | None = None) -> TeachingOutcome:
    """Teach every arm's expected payout to epsilon accuracy.

    Individual strategies pull one arm at a time; parallel strategies pull
    all arms at once, and ``steps`` then counts pulls while ``samples``
    counts pulls times arms. The per-arm budget is the Hoeffding count at
    confidence delta/k; the stop half-width is epsilon/2 against the true
    mean. The arm order for NSTD-IND defaults to ascending index.
    """
    strategy = _canon(strategy, BANDIT_STRATEGIES)
    k = c.k
    m = hoeffding_samples(AccuracyParams(params.epsilon, params.delta / k))
    half = params.epsilon / 2.0
    arm_order = list(order) if order is not None else list(range(k))
    if sorted(arm_order) != list(range(k)):
        raise ValueError("order must be a permutation of the arm indices")

    coll = TeachingCollection()
    per_arm: dict[int, int] = {}

    if strategy == "NTD-IND":
        for arm in arm_order:
            pulls = rng.random_block(m) < c.means[arm]
            wins = int(np.count_nonzero(pulls))
            coll.add(arm, 1, wins)
            coll.add(arm, 0, m - wins)
            per_arm[arm] = m
        total = k * m
        return TeachingOutcome(coll, total, total, False, per_arm)

    if strategy == "NSTD-IND":
        total = 0
        stopped_early = False
        for arm in arm_order:
            pulls = (rng.random_block(m) < c.means[arm]).astype(np.int64)
            cum = np.cumsum(pulls)
            hit = _first_hit(cum, c.means[arm], half)
            t = hit if hit is not None else m
            stopped_early = stopped_early or t < m
            coll.add(arm, 1, int(cum[t - 1]))
            coll.add(arm, 0, t - int(cum[t - 1]))
            per_arm[arm] = t
            total += t
        return TeachingOutcome(coll, total, total, stopped_early, per_arm)

    # parallel strategies: draw a pulls x arms matrix, one row per pull
    if strategy == "NTD-PAR":
        matrix = rng.random_block((m, k)) < np.asarray(c.means)
        pulls = m
    else:  # NSTD-PAR
        matrix = (rng.random_block((m, k)) < np.asarray(c.means)).astype(np.int64)
        cum = np.cumsum(matrix, axis=0)
        t_col = np.arange(1, m + 1)[:, None]
        in_band = np.abs(cum / t_col - np.asarray(c.means)) <= half
        all_in = np.all(in_band, axis=1)
        idx = int(np.argmax(all_in))
        pulls = (idx + 1) if all_in[idx] else m

    taken = matrix[:pulls]
    for arm in range(k):
        wins = int(np.count_nonzero(taken[:, arm]))
        coll.add(arm, 1, wins)
        coll.add(arm, 0, pulls - wins)
        per_arm[arm] = pulls
    return TeachingOutcome(
        collection=coll,
        steps=pulls,
        samples=pulls * k,
        stopped_early=(strategy == "NSTD-PAR" and pulls < m),
        per_condition_steps=per_arm,
    )


# ---------------------------------------------------------------------------
# DBNs


class BitflipProbePlan:
    """Probe construction for shift-register DBNs (see
    :func:`teachsim.concepts.bitflip_shift_concept`).

    Parallel probes use the alternating state with factor 0 set, which
    pins an identifying parent assignment for every factor at once.
    Individual probes use a block of ones below the active factor (all
    ones for factor 0), so every other factor sits at a deterministic
    assignment; factor 0's own condition is also exposed by those probes,
    which is why it is taught last, once its incidental samples usually
    already satisfy the stop rule.
    """

    def validate(self, c: DbnConcept) -> None:
        if c.n < 1:
            raise UnteachablePlanError("empty DBN")
        if c.parents[0] != (0,):
            raise UnteachablePlanError("factor 0 must read only its own value")
        for i in range(1, c.n):
            if c.parents[i] != (i - 1, i):
                raise UnteachablePlanError(
                    f"factor {i} must read (factor {i - 1}, factor {i})")
        if c.cpt[0][(0,)] != 0.0:
            raise UnteachablePlanError("factor 0 must stay 0 when currently 0")

    def conditions(self, c: DbnConcept) -> list[tuple[int, tuple[int, ...]]]:
        """Target conditions in teaching order: factors 1..n-1 at the
        shift-in assignment (1, 0), then factor 0 at assignment (1,)."""
        conds: list[tuple[int, tuple[int, ...]]] = [(i, (1, 0)) for i in range(1, c.n)]
        conds.append((0, (1,)))
        return conds

    def parallel_probe(self, c: DbnConcept) -> tuple[int, ...]:
        return tuple(1 if i % 2 == 0 else 0 for i in range(c.n))

    def individual_probe(self, c: DbnConcept, factor: int) -> tuple[int, ...]:
        if factor == 0:
            return (1,) * c.n
        return tuple(1 if i < factor else 0 for i in range(c.n))

    def identifies(self, c: DbnConcept, factor: int,
                   assignment: tuple[int, ...]) -> bool:
        """True when outcomes under the assignment pin down the factor's
        shift-success probability (shift-in value differs from the kept
        value, or factor 0 currently holds a 1)."""
        if factor == 0:
            return assignment == (1,)
        return assignment[0] != assignment[1]


def teach_dbn(strategy: str, c: DbnConcept, plan: BitflipProbePlan,
              params: AccuracyParams, rng: RandomSource) -> TeachingOutcome:
    """Teach the stochastic conditions of a DBN by choosing probe states.

    The per-condition accuracy budget is epsilon/n with confidence
    delta/n**k_par, so the fixed-budget teacher presents
    H(epsilon/n, delta/n**k_par) probes; the stopping teachers use the
    epsilon/(2n) half-width against the true conditional probability.
    Deterministic concepts are served by
    :func:`teach_dbn_deterministic` instead.
    """
    strategy = _canon(strategy, DBN_STRATEGIES)
    plan.validate(c)
    n = c.n
    cap = hoeffding_samples(
        AccuracyParams(params.epsilon / n, params.delta / n**c.k_par))
    band = params.epsilon / (2.0 * n)

    targets = plan.conditions(c)
    collection = TeachingCollection()
    per_condition: dict[tuple[int, tuple[int, ...]], int] = {}

    def outcomes_for(probe: tuple[int, ...], count: int) -> np.ndarray:
        """count x n matrix of sampled next states from the probe."""
        probs = np.array([c.factor_prob(i, probe) for i in range(n)])
        return (rng.random_block((count, n)) < probs).astype(np.int64)

    def record(probe: tuple[int, ...], rows: np.ndarray) -> None:
        for row in rows.tolist():
            collection.add(probe, tuple(row))

    if strategy in ("NTD", "NSTD-PAR"):
        probe = plan.parallel_probe(c)
        exposed = {i: c.parent_values(i, probe) for i in range(n)}
        for factor, assignment in targets:
            if not plan.identifies(c, factor, exposed[factor]):
                raise UnteachablePlanError(
                    f"parallel probe never exercises factor {factor}")
            # the probe may expose the complementary assignment of a target;
            # either pins the same shift probability
        outcomes = outcomes_for(probe, cap)
        if strategy == "NTD":
            taken = cap
        else:
            truths = np.array([c.cpt[i][exposed[i]] for i in range(n)])
            cum = np.cumsum(outcomes, axis=0)
            t_col = np.arange(1, cap + 1)[:, None]
            in_band = np.abs(cum / t_col - truths) <= band
            all_in = np.all(in_band, axis=1)
            idx = int(np.argmax(all_in))
            taken = (idx + 1) if all_in[idx] else cap
        record(probe, outcomes[:taken])
        for i in range(n):
            per_condition[(i, exposed[i])] = taken
        return TeachingOutcome(
            collection=collection,
            steps=taken,
            samples=taken,
            stopped_early=(strategy == "NSTD-PAR" and taken < cap),
            per_condition_steps=per_condition,
        )

    # NSTD-IND: one condition at a time, all other factors deterministic
    held: dict[tuple[int, tuple[int, ...]], list[int]] = {}  # key -> [count, heads]
    total = 0
    for factor, assignment in targets:
        probe = plan.individual_probe(c, factor)
        if c.parent_values(factor, probe) != assignment:
            raise UnteachablePlanError(
                f"individual probe never exercises factor {factor}")
        for j in range(n):
            a_j = c.parent_values(j, probe)
            if j != factor and plan.identifies(c, j, a_j) and (j, a_j) not in targets:
                raise UnteachablePlanError(
                    f"probe for factor {factor} leaks an untargeted condition on {j}")
        truth = c.cpt[factor][assignment]
        held_count, held_heads = held.get((factor, assignment), [0, 0])
        remaining = max(0, cap - held_count)
        taken = 0
        if held_count == 0 or abs(held_heads / held_count - truth) > band:
            if remaining == 0:
                taken = 0  # budget exhausted by incidental samples: capped
            else:
                outcomes = outcomes_for(probe, remaining)
                cum = np.cumsum(outcomes[:, factor])
                counts = held_count + np.arange(1, remaining + 1)
                means = (held_heads + cum) / counts
                hits = np.abs(means - truth) <= band
                idx = int(np.argmax(hits))
                taken = (idx + 1) if hits[idx] else remaining
                record(probe, outcomes[:taken])
                for j in range(n):
                    key = (j, c.parent_values(j, probe))
                    cnt, hd = held.get(key, [0, 0])
                    held[key] = [cnt + taken,
                                 hd + int(np.sum(outcomes[:taken, j]))]
        per_condition[(factor, assignment)] = taken
        total += taken
    return TeachingOutcome(
        collection=collection,
        steps=total,
        samples=total,
        stopped_early=total < cap * len(targets),
        per_condition_steps=per_condition,
    )


def teach_dbn_deterministic(c: DbnConcept,
                            first_probe: tuple[int, ...] | None = None
                            ) -> TeachingOutcome:
    """Teach a deterministic single-parent DBN with two probes: any state
    and its complement, which together exercise both values of every
    parent. The learner's CPT estimate is then exact."""
    if not c.is_deterministic:
        raise ValueError("concept has stochastic conditions; use teach_dbn")
    if any(len(p) > 1 for p in c.parents):
        raise ValueError("two probes only cover single-parent factors")
    probe = first_probe if first_probe is not None else (0,) * c.n
    if len(probe) != c.n:
        raise ValueError(f"probe must have length {c.n}")
    complement = tuple(1 - v for v in probe)
    collection = TeachingCollection()
    per_condition: dict[tuple[int, tuple[int, ...]], int] = {}
    for state in (probe, complement):
        outcome = tuple(int(c.factor_prob(i, state)) for i in range(c.n))
        collection.add(state, outcome)
        for i in range(c.n):
            key = (i, c.parent_values(i, state))
            per_condition[key] = per_condition.get(key, 0) + 1
    return TeachingOutcome(
        collection=collection,
        steps=2,
        samples=2,
        stopped_early=False,
        per_condition_steps=per_condition,
    )
