"""Surrogate system-level attack success metrics for TSR spatial memorization."""

from .core import (
    AttackGoal,
    DriveScenario,
    MemorizationPolicy,
    PolicyKind,
    SegmentProfile,
    SignSemantics,
    SweepGrid,
    mph_to_mps,
    uniform_profile,
    validate_profile,
)
from .memorization import (
    AttackOutcome,
    DisplayState,
    DriveTrace,
    SignInstance,
    reaction_task_outcome,
    run_display_experiment,
    step,
)
from .metrics import (
    SpatialSegmentation,
    map_to_spatial_segments,
    model_level_rate,
    sys_aa,
    sys_gap,
    sys_ha,
)
from .oracle import (
    OracleResult,
    exact_segment_oracle,
    frame_level_drive,
    monte_carlo_drive,
    subset_enumeration,
)
from .stats import binomial_exact_test, proportion_z_test
from .sweep import (
    aggregate_over_grid,
    max_gap,
    numerical_analysis_series,
    reproduce_paper_tables,
)

__version__ = "0.1.0"
