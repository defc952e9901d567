"""Inverse-kernel correction of an observed outcome distribution.

Row ``i`` of a kernel holds ``p(observed x_j | prepared x_i)``, so an observed
distribution is ``K.T @ ideal``; mitigation solves that system.
"""

from __future__ import annotations

import warnings

import numpy as np

from .core import FidelityMatrix, NumericalError, ValidationError

COND_WARN = 1e3


class IllConditionedKernelWarning(RuntimeWarning):
    pass


def forward(K: FidelityMatrix, ideal: np.ndarray) -> np.ndarray:
    """Observed distribution produced by ``K`` from an ideal one."""
    ideal = np.asarray(ideal, dtype=float)
    if ideal.shape != (K.dim,):
        raise ValidationError(f"distribution length {ideal.shape} does not match kernel dim {K.dim}")
    return K.entries.T @ ideal


def mitigate(
    K: FidelityMatrix,
    observed: np.ndarray,
    method: str = "solve",
    cond_warn: float = COND_WARN,
) -> tuple[np.ndarray, float]:
    """Recover the ideal distribution; returns ``(probs, condition_number)``.

    ``solve`` returns the exact solution, which may hold negative entries.
    ``project-solve`` clips negatives and renormalizes.
    """
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (K.dim,):
        raise ValidationError(f"distribution length {observed.shape} does not match kernel dim {K.dim}")
    if method not in ("solve", "project-solve"):
        raise ValidationError(f"unknown mitigation method {method!r}")
    A = K.entries.T
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise NumericalError(f"kernel is singular (condition number {cond:.3g})")
    if cond > cond_warn:
        warnings.warn(
            f"ill-conditioned kernel: condition number {cond:.3g}",
            IllConditionedKernelWarning,
            stacklevel=2,
        )
    try:
        x = np.linalg.solve(A, observed)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"kernel is singular: {exc}") from exc
    if method == "project-solve":
        x = np.clip(x, 0.0, None)
        total = x.sum()
        if total <= 0:
            raise NumericalError("projected solution has no positive mass")
        x = x / total
    return x, cond


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
