"""Safety-aware Boolean composition of goal-conditioned Q-tables on labeled grids."""

from .algebra import (
    KEY_EMPTY,
    KEY_UPPER,
    PolicyOracle,
    TaskLibrary,
    compile_formula,
    conj,
    disj,
    neg,
    negated_key,
    policy_select_conj,
    policy_select_disj,
)
from .formula import (
    And,
    Formula,
    Not,
    Or,
    Prop,
    Semantics,
    TaskSpec,
    evaluate,
    parse,
    partition_goals,
    render,
    to_nnf,
)
from .mdp import (
    ACTIONS,
    DOWN,
    LEFT,
    RIGHT,
    STAY,
    UP,
    Cell,
    Execution,
    LabeledMdp,
    PathStats,
    Region,
    build_mdp,
    project,
    project_nonempty,
    step,
)
from .oracle import (
    OracleResult,
    min_violation_path,
    optimal_return,
    safe_min_violation_path,
)
from .penalty import (
    BoundarySpec,
    NegatedSpec,
    PenaltyConfig,
    PositiveSpec,
    RewardSpec,
    SafetyExtendedSpec,
    avoid_path_len,
    derive_penalty_multiplier,
    penalty_multiplier,
    reward,
)
from .planner import (
    ExtendedQ,
    Policy,
    SafetyExtendedQ,
    bellman_residual,
    boundary_tables,
    extract_policy,
    value_iterate,
    value_iterate_safety,
)
from .runtime import PathClass, TrajectoryReport, classify, rollout, satisfied, score

__version__ = "0.1.0"
