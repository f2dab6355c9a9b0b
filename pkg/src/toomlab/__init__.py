"""Toom-family probabilistic cellular automata, their Floquet-Langevin
oscillator emulation, and the error statistics of the resulting time crystal."""

__version__ = "0.1.0"

from .pca import (  # noqa: F401
    DO_NOTHING,
    FLIP,
    NEC,
    PI_TOOM,
    RULES,
    TOOM,
    CARule,
    NoiseModel,
    PcaTrajectory,
    SpinConfig,
    apply_noise,
    apply_rule,
    magnetization,
    pca_step,
    run_pca,
)
from .langevin import (  # noqa: F401
    TAU,
    FloquetParams,
    IntegrationDivergedError,
    LangevinTrajectory,
    OscillatorLattice,
    decode_s,
    encode_q,
    interaction_potential,
    interaction_target,
    langevin_step,
    pin_potential,
    run_floquet,
    run_floquet_cycle,
)
from .analysis import (  # noqa: F401
    CumulantReport,
    ErrorField,
    ScgfReport,
    box_cumulants,
    connected_correlation,
    detect_errors,
    error_rate,
    extract_discrete,
    fit_cumulant_scaling,
    pe_equilibrium,
    scgf_bound,
)
from .config import ConfigError, RunConfig, load_config  # noqa: F401
from .scenarios import (  # noqa: F401
    InitialSpec,
    Scenario,
    build_initial,
    correction_trace,
    dtc_order_parameter,
    run_scenario,
)
from .streams import derive_stream  # noqa: F401
