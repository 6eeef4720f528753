"""Continuous-variable quantum computing on trapped-ion motional modes.

Truncated Fock-space simulator for the sideband-driven ion Hamiltonian, the
seven effective continuous-variable gates it generates, and a CV quantum
neural network trained on top of them.
"""

from . import analysis, cli, evolve, experiments, fock, gates, ion, qnn
from .analysis import WignerGrid, fidelity, leakage, mean_phonon, wigner
from .evolve import (
    ConvergenceError,
    EvolutionReport,
    NonHermitianError,
    PeriodicDrivePropagator,
    StepControl,
    propagate_const,
    propagate_tdep,
)
from .experiments import (
    RunRecord,
    TargetStateSpec,
    gate_benchmark,
    random_target_state,
    regression_experiment,
    save_run_record,
    state_prep_experiment,
)
from .fock import (
    CutoffTooSmallError,
    DenseOperator,
    DensityMatrix,
    FockVector,
    InvalidDimensionError,
    LayoutMismatchError,
    coherent,
    fock_state,
    identity,
    ladder,
    partial_trace,
    pauli,
    quadrature,
    spin_plus_state,
    tensor,
    vacuum,
)
from .gates import ideal_unitary
from .ion import (
    BeamSplitter,
    Displace,
    DriveSpec,
    GateSpec,
    IonConfig,
    Kerr,
    Phase,
    Squeeze,
    Tone,
    Trisqueeze,
    TwoModeSqueeze,
    corrected_rabi,
    effective_hamiltonian,
    full_hamiltonian,
    gate_time_and_drive,
)
from .qnn import (
    QnnLayerParams,
    QnnModel,
    TrainConfig,
    TrainingDivergedError,
    adam_step,
    encode,
    fidelity_loss,
    forward,
    grad_fd,
    mse_loss,
    predict,
    train,
)

__version__ = "0.1.0"
