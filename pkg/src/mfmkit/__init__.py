"""Measurement fidelity matrices: construction, cumulant reconstruction, correlation analysis."""

from .core import (
    BitString,
    CountsRecord,
    Distribution,
    FidelityMatrix,
    NumericalError,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    index_of,
    project_stochastic,
    restrict_bits,
)
from .cumulant import (
    CumulantTensor,
    cluster_product,
    cumulant1,
    cumulant2,
    cumulant3,
    permute_qubits,
    reconstruct_order2,
    reorder,
    scf,
    scf_by_target_state,
    tensor_product,
)
from .estimate import bias_correction_factor, build_mfm, extract_with_spectators, marginalize
from .metrics import (
    MetricReport,
    UncertaintyReport,
    correlation_heatmap,
    delta_f,
    dist_between,
    dist_from_identity,
    sigma_lambda_bound,
    sigma_p,
    sigma_scf_bound,
    significance,
    white_noise_bound,
)
from .simdevice import (
    Cluster,
    NoiseModel,
    circuit_cost,
    full_mfm_experiment,
    sample_counts,
    spectator_run,
    true_mfm,
)

__version__ = "0.1.0"

__all__ = [
    "BitString",
    "Cluster",
    "CountsRecord",
    "CumulantTensor",
    "Distribution",
    "FidelityMatrix",
    "MetricReport",
    "NoiseModel",
    "NumericalError",
    "QubitLayout",
    "SubsystemSelection",
    "UncertaintyReport",
    "ValidationError",
    "bias_correction_factor",
    "build_mfm",
    "circuit_cost",
    "cluster_product",
    "correlation_heatmap",
    "cumulant1",
    "cumulant2",
    "cumulant3",
    "delta_f",
    "dist_between",
    "dist_from_identity",
    "extract_with_spectators",
    "full_mfm_experiment",
    "index_of",
    "marginalize",
    "permute_qubits",
    "project_stochastic",
    "reconstruct_order2",
    "reorder",
    "restrict_bits",
    "sample_counts",
    "scf",
    "scf_by_target_state",
    "sigma_lambda_bound",
    "sigma_p",
    "sigma_scf_bound",
    "significance",
    "spectator_run",
    "tensor_product",
    "true_mfm",
    "white_noise_bound",
]
