"""Seeded Monte Carlo experiment runner.

Each experiment sweeps one parameter (accuracy target, arm count, bit
count, or taxi action set), runs every strategy for a fixed number of
trials with per-trial keyed random streams, and aggregates step counts
into per-cell statistics. Results are deterministic in the master seed
and can be emitted as CSV for plotting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Mapping, Sequence

from .concepts import BanditConcept, BernoulliConcept, bitflip_shift_concept
from .core import AccuracyParams, RandomSource, derive_stream
from .environments import BitflipEnv, TaxiEnv, enumerate_reachable
from .mdp_teaching import taxi_std_approx_teacher, teach_in_mdp
from .teachers import (
    BANDIT_STRATEGIES,
    BitflipProbePlan,
    COIN_INPUT,
    teach_bandit,
    teach_coin_nstd,
    teach_coin_ntd,
    teach_dbn,
)

EXPERIMENTS = ("coin", "bandit", "dbn", "taxi", "bitflip-seq")

TAXI_ACTION_SETS: dict[str, tuple[str, ...]] = {
    "pickup": ("pickup",),
    "pickup+dropoff": ("pickup", "dropoff"),
    "movement": ("up", "down", "left", "right"),
    "all": ("up", "down", "left", "right", "pickup", "dropoff"),
}
_ACTION_SET_ALIASES = {"pickup+putdown": "pickup+dropoff", "putdown": "pickup+dropoff"}

# The sequential experiment's accuracy settings and stochastic-shift
# success are unstated in the reproduced results; the defaults below give
# the strategies stable separation (see the acceptance suite).
_DEFAULTS: dict[str, dict] = {
    "coin": dict(strategies=["NTD", "NSTD"], runs=1000, delta=0.05,
                 epsilon_sweep=[1 / 10, 1 / 20, 1 / 30, 1 / 40, 1 / 50, 1 / 60]),
    "bandit": dict(strategies=list(BANDIT_STRATEGIES), runs=1000, delta=0.05,
                   epsilon=1 / 45, arms=[2, 4, 6, 8, 10]),
    "dbn": dict(strategies=["NTD", "NSTD-PAR", "NSTD-IND"], runs=500, delta=0.05,
                epsilon=0.3, bits=[2, 4, 6, 8]),
    "taxi": dict(strategies=["TD", "STD-APPROX"], runs=1, delta=0.05,
                 action_sets=list(TAXI_ACTION_SETS)),
    "bitflip-seq": dict(strategies=["NTD-PAR", "NSTD-PAR", "NSTD-IND"], runs=250,
                        epsilon=0.4, delta=0.005, bits=10,
                        stochastic_success=0.75),
}


@dataclass
class ExperimentConfig:
    """Everything a run needs; unset fields fall back to the experiment's
    defaults (resolved into a copy by :meth:`resolved`)."""

    experiment: str
    strategies: list[str] | None = None
    epsilon: float | None = None
    epsilon_sweep: list[float] | None = None
    delta: float | None = None
    runs: int | None = None
    master_seed: int = 0
    p_star: float = 0.5
    arms: list[int] | None = None
    bits: object = None  # int for bitflip-seq, list of ints for dbn sweeps
    stochastic_bits: list[int] | None = None
    stochastic_success: float | None = None
    action_sets: list[str] | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")

    def resolved(self) -> "ExperimentConfig":
        merged = asdict(self)
        for key, value in _DEFAULTS[self.experiment].items():
            if merged.get(key) is None:
                merged[key] = value
        cfg = ExperimentConfig(**merged)
        if cfg.runs is None or cfg.runs < 1:
            raise ValueError("run count must be at least 1")
        if cfg.epsilon is not None:
            AccuracyParams(cfg.epsilon, cfg.delta)  # validate
        for eps in cfg.epsilon_sweep or ():
            AccuracyParams(eps, cfg.delta)
        return cfg

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)!r}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TrialStats:
    """Aggregates for one (strategy, sweep point) cell."""

    experiment: str
    strategy: str
    sweep_param: str
    sweep_value: object
    runs: int
    mean: float
    std: float
    ci95: float
    min: float
    max: float


@dataclass
class ExperimentResult:
    stats: list[TrialStats]
    records: list[dict] = field(repr=False, default_factory=list)

    def cell(self, strategy: str, sweep_value) -> TrialStats:
        for row in self.stats:
            if row.strategy == strategy and row.sweep_value == sweep_value:
                return row
        raise KeyError((strategy, sweep_value))


def _aggregate(experiment: str, sweep_param: str, records: list[dict]) -> list[TrialStats]:
    cells: dict[tuple, list[float]] = {}
    for rec in records:
        cells.setdefault((rec["strategy"], rec["sweep_value"]), []).append(
            float(rec["steps"]))
    stats = []
    for (strategy, sweep_value) in sorted(cells, key=lambda k: (k[0], k[1])):
        xs = cells[(strategy, sweep_value)]
        n = len(xs)
        mean = math.fsum(xs) / n
        var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1) if n > 1 else 0.0
        std = math.sqrt(var)
        stats.append(TrialStats(
            experiment=experiment, strategy=strategy, sweep_param=sweep_param,
            sweep_value=sweep_value, runs=n, mean=mean, std=std,
            ci95=1.96 * std / math.sqrt(n), min=min(xs), max=max(xs)))
    return stats


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute every (strategy, sweep point, trial) cell of the configured
    experiment. Each trial draws from a stream keyed by the experiment,
    strategy, sweep value and trial index, so results do not depend on
    execution order; concept draws use a strategy-independent stream so
    every strategy faces the same concept in a given trial."""
    cfg = config.resolved()
    runner = {
        "coin": _run_coin,
        "bandit": _run_bandit,
        "dbn": _run_dbn,
        "taxi": _run_taxi,
        "bitflip-seq": _run_bitflip_seq,
    }[cfg.experiment]
    return runner(cfg)


def _teach_stream(cfg: ExperimentConfig, *parts) -> RandomSource:
    return RandomSource(cfg.master_seed, derive_stream(cfg.experiment, *parts))


def _run_coin(cfg: ExperimentConfig) -> ExperimentResult:
    sweep = cfg.epsilon_sweep if cfg.epsilon_sweep else [cfg.epsilon]
    concept = BernoulliConcept(cfg.p_star)
    teachers = {"NTD": teach_coin_ntd, "NSTD": teach_coin_nstd}
    records = []
    for strategy in [s.upper() for s in cfg.strategies]:
        if strategy not in teachers:
            raise ValueError(f"coin experiment has no strategy {strategy!r}")
        for eps in sweep:
            params = AccuracyParams(eps, cfg.delta)
            for trial in range(cfg.runs):
                rng = _teach_stream(cfg, strategy, eps, trial, "teach")
                outcome = teachers[strategy](concept, params, rng)
                heads = outcome.collection.label_counts(COIN_INPUT).get(1, 0)
                records.append(dict(
                    experiment=cfg.experiment, strategy=strategy,
                    sweep_value=eps, trial=trial, steps=outcome.steps,
                    samples=outcome.samples, stopped_early=outcome.stopped_early,
                    p_hat_abs_error=abs(heads / outcome.samples - cfg.p_star)))
    return ExperimentResult(_aggregate(cfg.experiment, "epsilon", records), records)


def _run_bandit(cfg: ExperimentConfig) -> ExperimentResult:
    params_eps = cfg.epsilon
    records = []
    for strategy in [s.upper() for s in cfg.strategies]:
        for k in cfg.arms:
            params = AccuracyParams(params_eps, cfg.delta)
            for trial in range(cfg.runs):
                model_rng = _teach_stream(cfg, k, trial, "model")
                concept = BanditConcept(tuple(model_rng.random_block(k)))
                rng = _teach_stream(cfg, strategy, k, trial, "teach")
                outcome = teach_bandit(strategy, concept, params, rng)
                records.append(dict(
                    experiment=cfg.experiment, strategy=strategy,
                    sweep_value=k, trial=trial, steps=outcome.steps,
                    samples=outcome.samples, stopped_early=outcome.stopped_early))
    return ExperimentResult(_aggregate(cfg.experiment, "arms", records), records)


def _run_dbn(cfg: ExperimentConfig) -> ExperimentResult:
    bits = cfg.bits if isinstance(cfg.bits, (list, tuple)) else [cfg.bits]
    plan = BitflipProbePlan()
    records = []
    for strategy in [s.upper() for s in cfg.strategies]:
        for n in bits:
            params = AccuracyParams(cfg.epsilon, cfg.delta)
            for trial in range(cfg.runs):
                model_rng = _teach_stream(cfg, n, trial, "model")
                concept = bitflip_shift_concept(n, tuple(model_rng.random_block(n)))
                rng = _teach_stream(cfg, strategy, n, trial, "teach")
                outcome = teach_dbn(strategy, concept, plan, params, rng)
                records.append(dict(
                    experiment=cfg.experiment, strategy=strategy,
                    sweep_value=n, trial=trial, steps=outcome.steps,
                    samples=outcome.samples, stopped_early=outcome.stopped_early))
    return ExperimentResult(_aggregate(cfg.experiment, "bits", records), records)


def _run_taxi(cfg: ExperimentConfig) -> ExperimentResult:
    env = TaxiEnv()
    reachable = enumerate_reachable(env)
    records = []
    for raw_name in cfg.action_sets:
        name = _ACTION_SET_ALIASES.get(raw_name, raw_name)
        if name not in TAXI_ACTION_SETS:
            raise ValueError(f"unknown taxi action set {raw_name!r}")
        schemas = TAXI_ACTION_SETS[name]
        for strategy in [s.upper() for s in cfg.strategies]:
            if strategy == "TD":
                seq = teach_in_mdp(env.true_preconditions(schemas), env, "td",
                                   reachable=reachable)
            elif strategy == "STD-APPROX":
                seq = taxi_std_approx_teacher(env, schemas)
            else:
                raise ValueError(f"taxi experiment has no strategy {strategy!r}")
            records.append(dict(
                experiment=cfg.experiment, strategy=strategy, sweep_value=name,
                trial=0, steps=len(seq), samples=len(seq), stopped_early=False))
    return ExperimentResult(_aggregate(cfg.experiment, "action_set", records), records)


def _run_bitflip_seq(cfg: ExperimentConfig) -> ExperimentResult:
    n = int(cfg.bits if not isinstance(cfg.bits, (list, tuple)) else cfg.bits[0])
    if cfg.stochastic_bits is None:
        # the middle bit and one from the top end
        noisy = {n // 2, max(0, n - 2)}
    else:
        noisy = {int(i) for i in cfg.stochastic_bits}
        out_of_range = [i for i in noisy if not 0 <= i < n]
        if out_of_range:
            raise ValueError(f"stochastic bits out of range: {out_of_range}")
    shift = [cfg.stochastic_success if i in noisy else 1.0 for i in range(n)]
    env = BitflipEnv(n, shift)
    concept = env.shift_concept()
    reachable = enumerate_reachable(env)
    planner_cache: dict = {}
    params = AccuracyParams(cfg.epsilon, cfg.delta)
    records = []
    for strategy in [s.upper() for s in cfg.strategies]:
        for trial in range(cfg.runs):
            rng = _teach_stream(cfg, strategy, n, trial, "teach")
            seq = teach_in_mdp(concept, env, strategy.lower(), params, rng,
                               reachable=reachable, planner_cache=planner_cache)
            records.append(dict(
                experiment=cfg.experiment, strategy=strategy, sweep_value=n,
                trial=trial, steps=len(seq), samples=len(seq),
                stopped_early=False))
    return ExperimentResult(_aggregate(cfg.experiment, "bits", records), records)


# ---------------------------------------------------------------------------
# output


def emit_csv(stats: Sequence[TrialStats], path: str) -> None:
    """Write one row per (strategy, sweep point) cell, ordered by strategy
    then sweep value, with full-precision decimal numbers. Identical
    configurations produce byte-identical files."""
    if not stats:
        raise ValueError("no statistics to write")
    header = ("experiment,strategy,sweep_param,sweep_value,runs,"
              "mean,std,ci95,min,max")
    lines = [header]
    for row in sorted(stats, key=lambda r: (r.strategy, r.sweep_value)):
        lines.append(",".join([
            row.experiment, row.strategy, row.sweep_param,
            _csv_number(row.sweep_value), str(row.runs),
            _csv_number(row.mean), _csv_number(row.std), _csv_number(row.ci95),
            _csv_number(row.min), _csv_number(row.max)]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _csv_number(value) -> str:
    if isinstance(value, bool):  # pragma: no cover - not emitted today
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float


def fit_scaling(stats: Sequence[TrialStats]) -> ScalingFit:
    """Least-squares fit of mean steps against the inverse accuracy
    target, for rows swept over epsilon. A stopping teacher whose expected
    time is linear in 1/epsilon fits with r_squared near 1; a fixed-budget
    teacher (quadratic in 1/epsilon) fits visibly worse."""
    points = [(1.0 / float(row.sweep_value), row.mean) for row in stats]
    xs = [p[0] for p in points]
    if len(set(xs)) < 2:
        raise ValueError("scaling fit needs at least two distinct sweep values")
    n = len(points)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(p[1] for p in points) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in points)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = math.fsum((y - (slope * x + intercept)) ** 2 for x, y in points)
    ss_tot = math.fsum((y - mean_y) ** 2 for _, y in points)
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingFit(slope=slope, intercept=intercept, r_squared=r_squared)
