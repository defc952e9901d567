"""Scalar diagnostics, uncertainty propagation and the significance rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import FidelityMatrix, QubitLayout, ValidationError, kron_on_positions
from .cumulant import CumulantTensor


@dataclass(frozen=True)
class MetricReport:
    dist_identity: float
    n_qubits: int
    white_noise_bound: float
    dist_reference: float | None = None
    delta_f: float | None = None

    def to_dict(self) -> dict:
        return {
            "dist_identity": self.dist_identity,
            "dist_reference": self.dist_reference,
            "delta_f": self.delta_f,
            "n_qubits": self.n_qubits,
            "white_noise_bound": self.white_noise_bound,
        }


@dataclass(frozen=True, eq=False)
class UncertaintyReport:
    sigma_lambda: np.ndarray
    sigma_scf: float
    scf: float
    significant: bool


def _check_same(K1: FidelityMatrix, K2: FidelityMatrix):
    if K1.entries.shape != K2.entries.shape:
        raise ValidationError(f"dimension mismatch: {K1.entries.shape} vs {K2.entries.shape}")
    if K1.layout != K2.layout:
        raise ValidationError(f"layout mismatch: {K1.layout} vs {K2.layout} (permute first)")


def dist_from_identity(K: FidelityMatrix) -> float:
    return float(np.linalg.norm(K.entries - np.eye(K.dim)))


def dist_between(K1: FidelityMatrix, K2: FidelityMatrix) -> float:
    _check_same(K1, K2)
    return float(np.linalg.norm(K1.entries - K2.entries))


def delta_f(K1: FidelityMatrix, K2: FidelityMatrix) -> float:
    """RMS difference of the state fidelities (matrix diagonals)."""
    if K1.entries.shape != K2.entries.shape:
        raise ValidationError(f"dimension mismatch: {K1.entries.shape} vs {K2.entries.shape}")
    d = np.diag(K1.entries) - np.diag(K2.entries)
    return float(math.sqrt(np.mean(d * d)))


def white_noise_bound(n: int) -> float:
    """Distance from identity of the all-uniform n-qubit kernel."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return math.sqrt(2.0**n - 1.0)


def metric_report(K: FidelityMatrix, reference: FidelityMatrix | None = None) -> MetricReport:
    return MetricReport(
        dist_identity=dist_from_identity(K),
        n_qubits=K.width,
        white_noise_bound=white_noise_bound(K.width),
        dist_reference=None if reference is None else dist_between(K, reference),
        delta_f=None if reference is None else delta_f(K, reference),
    )


def _check_shots(n_s):
    if np.any(np.asarray(n_s) < 1):
        raise ValidationError(f"shot count must be >= 1, got {n_s}")


def _check_prob(*ps, tol=1e-12):
    for p in ps:
        a = np.asarray(p, dtype=float)
        if np.any(a < -tol) or np.any(a > 1 + tol):
            raise ValidationError("probabilities must lie in [0, 1]")


def sigma_p(p, n_s):
    """``p (1 - p) / n_s`` for an empirical conditional probability.

    This is the binomial variance of the estimate; take its square root for a
    standard deviation.
    """
    _check_prob(p)
    _check_shots(n_s)
    p = np.asarray(p, dtype=float)
    out = p * (1.0 - p) / n_s
    return float(out) if out.ndim == 0 else out


def sigma_lambda_bound(p_ab, p_a, p_b, n_s):
    """Upper bound ``sqrt((p_ab + p_a + p_b) / n_s)`` on the std of a two-body cumulant entry."""
    _check_prob(p_ab, p_a, p_b)
    _check_shots(n_s)
    out = np.sqrt((np.asarray(p_ab, float) + np.asarray(p_a, float) + np.asarray(p_b, float)) / n_s)
    return float(out) if out.ndim == 0 else out


def sigma_lambda_array(
    K_AB: FidelityMatrix, K_A: FidelityMatrix, K_B: FidelityMatrix, n_s: int | None = None
) -> np.ndarray:
    """Entrywise ``sigma_lambda_bound`` with the factor probabilities at the restricted bits."""
    n_s = K_AB.shots if n_s is None else n_s
    if n_s is None:
        raise ValidationError("shot count unknown; pass n_s explicitly")
    layout = K_AB.layout
    ones_B = np.ones((K_B.dim, K_B.dim))
    ones_A = np.ones((K_A.dim, K_A.dim))
    pos_A = layout.positions(K_A.layout.qubits)
    pos_B = layout.positions(K_B.layout.qubits)
    target = range(layout.width)
    p_a = kron_on_positions([K_A.entries, ones_B], [pos_A, pos_B], target)
    p_b = kron_on_positions([ones_A, K_B.entries], [pos_A, pos_B], target)
    # estimated probabilities may sit a hair outside [0, 1] after float division
    clip = lambda a: np.clip(a, 0.0, 1.0)
    return sigma_lambda_bound(clip(K_AB.entries), clip(p_a), clip(p_b), n_s)


def _weighted_sigma(values: np.ndarray, sigma: np.ndarray) -> float:
    lam2 = float(np.sum(values * values))
    if lam2 == 0.0:
        # undefined for a vanishing SCF; fall back to the RMS entry sigma
        return float(math.sqrt(np.sum(sigma * sigma)) / math.sqrt(sigma.size))
    return float(math.sqrt(np.sum(values * values * sigma * sigma) / lam2))


def sigma_scf_bound(lam: CumulantTensor) -> float:
    """Propagated bound on the std of the SCF ``||lambda||_F``."""
    if lam.sigma is None:
        raise ValidationError("cumulant tensor carries no per-entry sigma")
    return _weighted_sigma(lam.values, lam.sigma)


def sigma_scf_by_target_state(lam: CumulantTensor) -> np.ndarray:
    """The same bound applied to each input-state slice separately."""
    if lam.sigma is None:
        raise ValidationError("cumulant tensor carries no per-entry sigma")
    return np.array([_weighted_sigma(v, s) for v, s in zip(lam.values, lam.sigma)])


def significance(scf: float, sigma_scf: float) -> bool:
    return scf > sigma_scf


def scf_uncertainty(
    lam: CumulantTensor, K_AB: FidelityMatrix, K_A: FidelityMatrix, K_B: FidelityMatrix
) -> tuple[CumulantTensor, UncertaintyReport]:
    """Attach per-entry sigma to ``lam`` and evaluate the significance rule."""
    n_s = lam.shots if lam.shots is not None else K_AB.shots
    sig = sigma_lambda_array(K_AB, K_A, K_B, n_s)
    lam = lam.with_sigma(sig)
    value = lam.norm
    s = sigma_scf_bound(lam)
    return lam, UncertaintyReport(sig, s, value, significance(value, s))


def correlation_heatmap(
    layout: QubitLayout,
    pair_results: Mapping[tuple[int, int], tuple[float, float]],
    *,
    absolute: bool = False,
) -> np.ndarray:
    """Symmetric qubit-by-qubit matrix of ``max(scf - sigma, 0)``.

    Keys of ``pair_results`` are qubit-id pairs in either order. With
    ``absolute=True`` the entry is ``|scf - sigma|`` instead.
    """
    n = layout.width
    by_set = {}
    for (a, b), v in pair_results.items():
        by_set[frozenset((a, b))] = v
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            key = frozenset((layout.qubits[i], layout.qubits[j]))
            if key not in by_set:
                raise ValidationError(f"missing pair ({layout.qubits[i]}, {layout.qubits[j]})")
            value, sigma = by_set[key]
            h = abs(value - sigma) if absolute else max(value - sigma, 0.0)
            H[i, j] = H[j, i] = h
    return H
