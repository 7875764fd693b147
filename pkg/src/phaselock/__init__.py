"""Phase-locking based source separation and clustering.

Three gradient-verified optimizers over instantaneous phases — referenced
extraction (RPA), subspace unmixing (IPA), and cluster rotation (pSCA) —
plus a Kuramoto oscillator simulator that manufactures ground-truth
phase-locked data to exercise them end to end.
"""

from .exceptions import (
    AmplitudeFloorError,
    CsvFormatError,
    GradientKinkError,
    NonFiniteError,
    PhaseLockError,
    SingularMatrixError,
)
from .ipa import IPAProblem, IPASolution, ipa_gradient, ipa_objective, ipa_solve
from .kuramoto import (
    MeanField,
    OscillatorNetwork,
    PhaseTrajectory,
    clustered,
    mean_field,
    mean_field_coupling_check,
    mix,
    phase_derivative,
    simulate,
    synth_sources,
)
from .optim import (
    OptimizerConfig,
    OptimizerTrace,
    Retraction,
    Termination,
    ascend,
    descend,
    fd_gradient,
    relative_gradient_error,
)
from .psca import PSCAProblem, PSCASolution, psca_gradient, psca_objective, psca_solve
from .rpa import RPAProblem, RPASolution, rpa_gradient, rpa_objective, rpa_solve
from .signalcore import (
    AnalyticMatrix,
    ComplexPLV,
    PairwiseKernel,
    PLVMatrix,
    SignalMatrix,
    analytic,
    circular_mean_phase_diff,
    mean_offdiag_magnitude,
    mean_phase_diff,
    pairwise_kernel,
    plv,
    plv_matrix,
    wrap_phase,
)

__version__ = "0.1.0"
