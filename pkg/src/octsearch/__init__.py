"""Multi-object search in a discretized 3D grid: octree beliefs,
frustum observations, and multi-resolution online POMDP planning."""

from ._impl import IMPL_NAME
from .abstraction import (
    AbstractInstance,
    MoveOpPlan,
    abstract_generative,
    abstract_observation,
    abstract_state,
    expand_moveop,
    make_instance,
    moveop_goals,
)
from .belief import LabeledVoxel, OctreeBelief
from .domain import (
    PRIMITIVE_ACTIONS,
    FactoredObservation,
    Find,
    Look,
    MosState,
    Move,
    MoveOp,
    RewardSpec,
    RobotState,
    SensorModel,
    belief_update_all,
    generative,
    reward,
    sample_observation,
    transition,
)
from .geometry import (
    FREE,
    OUT_OF_GRID,
    UNKNOWN,
    CameraPose,
    CellAtLevel,
    FrustumParams,
    VisibilityResult,
    cell_visible,
    compute_visibility,
    frustum_contains,
    max_coverage_fraction,
)
from .harness import (
    ExperimentConfig,
    TrialResult,
    aggregate,
    emit_outputs,
    run_batch,
    run_experiment,
    run_trial,
)
from .planners import (
    MrPouctPlanner,
    PlanDecision,
    PlannerConfig,
    PomcpPlanner,
    execute_step,
    pouct_plan,
)
from .sim import Episode, ExhaustiveSweep, WorldSpec, generate_world, random_policy

__version__ = "0.1.0"

__all__ = [
    "AbstractInstance", "CameraPose", "CellAtLevel", "Episode",
    "ExhaustiveSweep", "ExperimentConfig", "FactoredObservation", "Find",
    "FREE", "FrustumParams", "IMPL_NAME", "LabeledVoxel", "Look", "MosState",
    "Move", "MoveOp", "MoveOpPlan", "MrPouctPlanner", "OctreeBelief",
    "OUT_OF_GRID", "PlanDecision", "PlannerConfig", "PomcpPlanner",
    "PRIMITIVE_ACTIONS", "RewardSpec", "RobotState", "SensorModel",
    "TrialResult", "UNKNOWN", "VisibilityResult", "WorldSpec",
    "abstract_generative", "abstract_observation", "abstract_state",
    "aggregate", "belief_update_all", "cell_visible", "compute_visibility",
    "emit_outputs", "execute_step", "expand_moveop", "frustum_contains",
    "generate_world", "generative", "make_instance", "max_coverage_fraction",
    "moveop_goals", "pouct_plan", "random_policy", "reward", "run_batch",
    "run_experiment", "run_trial", "sample_observation", "transition",
    "__version__",
]
