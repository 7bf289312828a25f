"""Model-based parallel 2D FFT.

Rows of an ``n x n`` complex matrix are split between groups of workers
according to empirically measured speed functions, optionally padding each
group's rows to a faster FFT length.
"""

from .benchmark import (
    GroupConfig,
    MeasurementPolicy,
    MeasurementResult,
    StopReason,
    SweepSpec,
    SyntheticClock,
    build_speed_functions,
    mean_using_ttest,
    policy_for_problem_size,
    t_critical,
)
from .engine import (
    ExecutionPlan,
    FftBackend,
    NumpyBackend,
    ScipyBackend,
    SignalMatrix,
    Variant,
    dft2d_naive,
    dft2d_padded_reference,
    execute,
    execute_fpm_pad,
    fpm_plan,
    lb_plan,
    rows_fft_batch,
    sequential_plan,
    transpose_blocked,
)
from .fpm_model import (
    DomainError,
    ModelFormatError,
    ModelNotFoundError,
    SpeedCurve,
    SpeedFunction,
    SpeedPoint,
    load_speed_functions,
    save_speed_functions,
    section_at_x,
    section_at_y,
    speed_at,
    speed_from_time,
    variation_percent,
)
from .padding import PadDecision, determine_pad_length, plan_padding
from .partitioner import (
    HomogeneityReport,
    RowDistribution,
    brute_force_partition,
    harmonic_mean_curve,
    homogeneity_check,
    partition,
    predicted_time,
    solve_heterogeneous,
    solve_homogeneous,
)
from .pipeline import FpmPlan, pfft_fpm, plan_fpm

__version__ = "0.1.0"
