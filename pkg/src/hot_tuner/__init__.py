"""Noise-robust high-order tuner for linear regression.

Library layout:
    model    -- ground truth, regressor generators, bounded-moment noise
    tuner    -- the two-state high-order tuner and the gradient-descent baseline
    lyapunov -- candidate Lyapunov function, decrement-bound constants, thresholds
    verify   -- trajectory / ensemble runners and the stochastic stability checks
    config   -- JSON run configuration
    cli      -- `hot-tuner` command-line front end
"""

__version__ = "0.1.0"

from .model import (
    TrueModel,
    Observation,
    Constant,
    Sinusoid,
    IidBounded,
    PiecewiseConstant,
    Zero,
    BiasedGaussianTruncated,
    UniformBiased,
    StateDependentBias,
    generate_regressor,
    sample_noise,
    emit_observation,
)
from .tuner import Gains, TunerState, NonFiniteError, hot_step, gd_step
from .lyapunov import (
    LyapunovConstants,
    DegenerateConstantsError,
    InvalidAlphaError,
    lyapunov_value,
    gamma_max,
    constants,
    threshold_K,
    threshold_T,
    clipped_V,
    psi,
    theorem4_radius,
)
from .config import RunConfig, ConfigError
