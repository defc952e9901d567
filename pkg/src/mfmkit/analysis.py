"""Workflows that combine estimation, cumulants and metrics over a pool of data."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import BitString, FidelityMatrix, QubitLayout, SubsystemSelection, ValidationError
from .cumulant import (
    CumulantTensor,
    cluster_product,
    cumulant1,
    cumulant2,
    cumulant3,
    reconstruct_order2,
    reorder,
    scf,
    scf_by_target_state,
    tensor_product,
)
from .estimate import build_mfm, extract_with_spectators, marginalize
from .io import CountsFile, FileFormatError, load_counts, load_matrix
from .metrics import (
    UncertaintyReport,
    correlation_heatmap,
    scf_uncertainty,
    sigma_scf_by_target_state,
)


def counts_to_mfm(counts: CountsFile) -> FidelityMatrix:
    """Full-layout MFM, or the target MFM when the file declares spectators."""
    if counts.spectator_positions:
        target = SubsystemSelection(counts.layout, counts.layout.positions(counts.target_qubits))
        return extract_with_spectators(counts.records, target)
    return build_mfm(counts.records, counts.layout)


@dataclass
class MFMPool:
    """Measured MFMs on various qubit subsets; answers requests for any subset.

    An exact match (up to qubit order) is returned as is. Otherwise the
    smallest stored superset is marginalized, earliest-added first on ties.
    """

    matrices: list[FidelityMatrix] = field(default_factory=list)

    def add(self, K: FidelityMatrix):
        self.matrices.append(K)

    @classmethod
    def from_files(cls, paths: Iterable[str | Path]) -> MFMPool:
        pool = cls()
        for p in paths:
            kind = _file_kind(p)
            pool.add(load_matrix(p) if kind == "mfm" else counts_to_mfm(load_counts(p)))
        return pool

    def get(self, qubits: Sequence[int]) -> tuple[FidelityMatrix, bool]:
        """``(matrix, derived)``; ``derived`` is True when marginalized from a superset."""
        want = set(qubits)
        target = QubitLayout(qubits)
        best = None
        for K in self.matrices:
            have = set(K.layout.qubits)
            if have == want:
                return reorder(K, target), False
            if want < have and (best is None or K.width < best.width):
                best = K
        if best is None:
            raise ValidationError(f"no input covers qubits {list(qubits)}")
        return marginalize(best, SubsystemSelection.of_qubits(best.layout, qubits)), True


def _file_kind(path) -> str:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: field <root>: expected an object")
    if doc.get("kind") == "mfm" or ("entries" in doc and "records" not in doc):
        return "mfm"
    return "counts"


# -- reconstruction ----------------------------------------------------------------


def singles_from_pool(pool: MFMPool, layout: QubitLayout) -> list[FidelityMatrix]:
    return [pool.get((q,))[0] for q in layout.qubits]


def cumulant_inputs(
    pool: MFMPool, layout: QubitLayout, order: int = 2, bias_correct: bool = False
) -> tuple[list[CumulantTensor], list[CumulantTensor], list[CumulantTensor]]:
    singles_K = {q: pool.get((q,))[0] for q in layout.qubits}
    pairs_K = {}
    singles = [cumulant1(singles_K[q]) for q in layout.qubits]
    pairs = []
    if order >= 2:
        for a, b in combinations(layout.qubits, 2):
            K_ab = pool.get((a, b))[0]
            pairs_K[(a, b)] = K_ab
            pairs.append(cumulant2(K_ab, singles_K[a], singles_K[b], bias_correct=bias_correct))
    triples = []
    if order >= 3:
        for trio in combinations(layout.qubits, 3):
            K_abc = pool.get(trio)[0]
            three_pairs = [pairs_K[p] for p in combinations(trio, 2)]
            triples.append(cumulant3(K_abc, three_pairs, [singles_K[q] for q in trio]))
    return singles, pairs, triples


def reconstruct(
    pool: MFMPool,
    layout: QubitLayout,
    mode: str,
    *,
    bias_correct: bool = False,
    clusters: Sequence[Sequence[int]] | None = None,
) -> FidelityMatrix:
    """``mode`` is ``singles``, ``cumulant2``, ``cumulant3`` or ``cluster``."""
    if mode == "singles":
        return tensor_product(singles_from_pool(pool, layout))
    if mode in ("cumulant2", "cumulant3"):
        order = 2 if mode == "cumulant2" else 3
        singles, pairs, triples = cumulant_inputs(pool, layout, order, bias_correct)
        return reconstruct_order2(singles, pairs, layout, order=order, triples=triples)
    if mode == "cluster":
        if not clusters:
            raise ValidationError("cluster mode needs a cluster list")
        pieces = [
            (pool.get(tuple(c))[0], SubsystemSelection.of_qubits(layout, c)) for c in clusters
        ]
        return cluster_product(pieces, layout)
    raise ValidationError(f"unknown reconstruction mode {mode!r}")


# -- scalar correlation factor -------------------------------------------------------


@dataclass
class SCFResult:
    block_a: tuple[int, ...]
    block_b: tuple[int, ...]
    cumulant: CumulantTensor
    report: UncertaintyReport
    per_state: dict[BitString, float]
    per_state_sigma: dict[BitString, float]
    derived_factors: bool

    def to_dict(self) -> dict:
        return {
            "a": list(self.block_a),
            "b": list(self.block_b),
            "scf": self.report.scf,
            "sigma_scf": self.report.sigma_scf,
            "significant": self.report.significant,
            "bias_corrected": self.cumulant.bias_corrected,
            "derived_factors": self.derived_factors,
            "per_state": {
                str(k): {"scf": v, "sigma_scf": self.per_state_sigma[k]} for k, v in self.per_state.items()
            },
        }


def block_scf(
    pool: MFMPool,
    block_a: Sequence[int],
    block_b: Sequence[int],
    *,
    factors: str = "joint",
    bias_correct: bool | None = None,
) -> SCFResult:
    """SCF between two qubit blocks.

    ``factors="joint"`` marginalizes both factors from the joint MFM (same
    samples, so bias correction defaults on); ``factors="pool"`` resolves
    them from the pool like any other subsystem (defaults off).
    """
    qubits = tuple(block_a) + tuple(block_b)
    K_AB, _ = pool.get(qubits)
    if factors == "joint":
        K_A = marginalize(K_AB, SubsystemSelection(K_AB.layout, range(len(block_a))))
        K_B = marginalize(K_AB, SubsystemSelection(K_AB.layout, range(len(block_a), len(qubits))))
        derived = True
    elif factors == "pool":
        (K_A, da), (K_B, db) = pool.get(tuple(block_a)), pool.get(tuple(block_b))
        derived = da or db
    else:
        raise ValidationError(f"unknown factor source {factors!r}")
    if bias_correct is None:
        bias_correct = factors == "joint"
    lam, _ = scf(K_AB, K_A, K_B, bias_correct=bias_correct)
    lam, report = scf_uncertainty(lam, K_AB, K_A, K_B)
    per_state = scf_by_target_state(lam)
    sig = sigma_scf_by_target_state(lam)
    per_sigma = {k: float(s) for k, s in zip(per_state, sig)}
    return SCFResult(tuple(block_a), tuple(block_b), lam, report, per_state, per_sigma, derived)


def pairwise_scf(pool: MFMPool, layout: QubitLayout, **kwargs) -> list[SCFResult]:
    return [block_scf(pool, (a,), (b,), **kwargs) for a, b in combinations(layout.qubits, 2)]


def heatmap(layout: QubitLayout, results: Sequence[SCFResult], *, absolute: bool = False) -> np.ndarray:
    return correlation_heatmap(
        layout,
        {(r.block_a[0], r.block_b[0]): (r.report.scf, r.report.sigma_scf) for r in results},
        absolute=absolute,
    )


def heatmap_by_state(
    layout: QubitLayout, results: Sequence[SCFResult], *, absolute: bool = False
) -> dict[str, np.ndarray]:
    states = [str(s) for s in results[0].per_state] if results else []
    out = {}
    for s in states:
        key = BitString.from_str(s)
        out[s] = correlation_heatmap(
            layout,
            {(r.block_a[0], r.block_b[0]): (r.per_state[key], r.per_state_sigma[key]) for r in results},
            absolute=absolute,
        )
    return out
