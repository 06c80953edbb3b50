"""Driven Kerr resonator with frequency-dependent (non-Markovian) loss."""

from .kernels import (
    ComplexKernelSample,
    FanoMirror,
    FriedrichWintgen,
    KernelConsistencyError,
    KernelModel,
    Markovian,
    SystemParams,
    WithBackground,
    coupling_at,
    kk_residual,
    load_system,
    loss_at,
    response_xi,
    sum_rule_check,
    time_kernel,
)
from .steadystate import (
    BistabilityReport,
    BranchSweep,
    Drive,
    StabilityClass,
    SteadyState,
    UncoupledPumpError,
    bistability_threshold,
    pump_for_n,
    steady_roots,
    sweep_input_output,
    turning_point_numbers,
)
from .noise import (
    FluctuationKernel,
    LinearizedPoint,
    NoiseDivergenceError,
    NoiseResult,
    SingularResponseError,
    UnstablePointError,
    noise_spectrum,
    quadrature_variance,
    sharp_loss_slope,
    transfer_pq,
    variance_adiabatic,
    variance_exact,
)
from .stability import (
    PhaseDiagram,
    StabilityReport,
    adiabatic_re_lambda,
    classify,
    fw_matrix,
    phase_diagram,
)
from .dynamics import (
    PulsingDiagnostics,
    Trajectory,
    diagnose_pulsing,
    simulate_split_step,
    simulate_two_mode,
)

__version__ = "0.1.0"
