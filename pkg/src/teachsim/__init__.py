"""teachsim: machine-teaching protocols for noisy concepts and MDPs.

The package simulates teachers that pick maximally informative samples
for a learner: fixed-budget and stopping-rule teachers for coins, bandit
arms and DBN conditions in the supervised setting, and a greedy touring
teacher that demonstrates concepts inside an MDP.
"""

from .core import (
    AccuracyParams,
    LabelDistribution,
    RandomSource,
    Sample,
    TeachingCollection,
    UndefinedDistributionError,
    bernoulli_sample,
    derive_stream,
    empirical_distribution,
    hoeffding_samples,
    tv_distance,
)
from .concepts import (
    BanditConcept,
    BernoulliConcept,
    DbnConcept,
    FactorEstimate,
    IncompleteTeachingError,
    InconsistentSampleError,
    MonotoneConjunction,
    VersionSpace,
    aggregate_model_error,
    bitflip_shift_concept,
    concept_from_dict,
    conjunction_label,
    dbn_condition_estimates,
    dbn_next_state_distribution,
    mle_predict,
    version_space_update,
)
from .teachers import (
    BitflipProbePlan,
    StopRule,
    TeachingOutcome,
    UnteachablePlanError,
    std_infer,
    teach_bandit,
    teach_coin_nstd,
    teach_coin_ntd,
    teach_conjunction_std,
    teach_conjunction_td,
    teach_dbn,
    teach_dbn_deterministic,
)
from .environments import (
    BitflipEnv,
    GroundedInstance,
    Mdp,
    TaxiEnv,
    TeachingSequence,
    TransitionExperience,
    TruncationError,
    enumerate_reachable,
    env_from_config,
    ground_predicates,
    step,
)
from .mdp_teaching import (
    ExpectedStepsPlan,
    PathPlan,
    TeachingTarget,
    UnreachableTargetError,
    UnteachableError,
    build_teaching_set_greedy,
    consistent_precondition_learner,
    expected_steps_planner,
    greedy_set_cover,
    greedy_visit_order,
    nsstd_coin_direction,
    nsstd_coin_infer,
    shortest_path_deterministic,
    std_precondition_learner,
    taxi_std_approx_teacher,
    teach_in_mdp,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    ScalingFit,
    TrialStats,
    emit_csv,
    fit_scaling,
    run_experiment,
)

__version__ = "0.1.0"
