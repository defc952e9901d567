"""Cumulants of conditional-probability matrices and the MFMs they generate.

A k-qubit cumulant tensor is stored as a ``2^k x 2^k`` array indexed
``(input, output)`` over its own layout, exactly like a fidelity matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BitString,
    FidelityMatrix,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    _frozen_array,
    kron_on_positions,
    transpose_positions,
)
from .estimate import bias_correction_factor, marginalize


@dataclass(frozen=True, eq=False)
class CumulantTensor:
    """Cumulant values over a qubit subset, optionally with per-entry uncertainties."""

    layout: QubitLayout
    values: np.ndarray
    sigma: np.ndarray | None = None
    bias_corrected: bool = False
    shots: int | None = None

    def __post_init__(self):
        v = _frozen_array(self.values)
        object.__setattr__(self, "values", v)
        d = self.layout.dim
        if v.shape != (d, d):
            raise ValidationError(f"cumulant shape {v.shape} does not match layout {self.layout}")
        if self.sigma is not None:
            s = _frozen_array(self.sigma)
            if s.shape != v.shape:
                raise ValidationError("sigma shape differs from cumulant shape")
            if (s < 0).any():
                raise ValidationError("sigma entries must be non-negative")
            object.__setattr__(self, "sigma", s)

    @property
    def order(self) -> int:
        return self.layout.width

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_sigma(self, sigma: np.ndarray) -> CumulantTensor:
        return CumulantTensor(self.layout, self.values, sigma, self.bias_corrected, self.shots)

    def on_order(self, qubits: Sequence[int]) -> np.ndarray:
        """Values with bit positions rearranged to follow ``qubits``."""
        return transpose_positions(self.values, self.layout.positions(qubits))


def _check_width(K: FidelityMatrix, width: int, name: str):
    if K.width != width:
        raise ValidationError(f"{name} must be a {width}-qubit matrix, got layout {K.layout}")


def _on_layout(factors: Sequence[tuple[np.ndarray, QubitLayout]], layout: QubitLayout) -> np.ndarray:
    """Product of factor arrays evaluated at the restricted bits of ``layout``'s indices."""
    return kron_on_positions(
        [a for a, _ in factors], [layout.positions(fl.qubits) for _, fl in factors], range(layout.width)
    )


def _index_by_qubits(matrices: Iterable[FidelityMatrix]) -> dict[frozenset[int], FidelityMatrix]:
    out: dict[frozenset[int], FidelityMatrix] = {}
    for K in matrices:
        key = frozenset(K.layout.qubits)
        if key in out:
            raise ValidationError(f"two matrices supplied for qubits {sorted(key)}")
        out[key] = K
    return out


def _lookup(table, qubits: Iterable[int], what: str):
    key = frozenset(qubits)
    try:
        return table[key]
    except KeyError:
        raise ValidationError(f"missing {what} for qubits {sorted(key)}") from None


def cumulant1(K_a: FidelityMatrix) -> CumulantTensor:
    """One-qubit cumulants are the conditional probabilities themselves."""
    _check_width(K_a, 1, "K_a")
    return CumulantTensor(K_a.layout, K_a.entries, shots=K_a.shots)


def cumulant2(
    K_ab: FidelityMatrix,
    K_a: FidelityMatrix,
    K_b: FidelityMatrix,
    *,
    bias_correct: bool = False,
) -> CumulantTensor:
    """``p_ab(j|i) - p_a(j_a|i_a) p_b(j_b|i_b)`` on the layout of ``K_ab``."""
    _check_width(K_ab, 2, "K_ab")
    _check_width(K_a, 1, "K_a")
    _check_width(K_b, 1, "K_b")
    return _two_block_cumulant(K_ab, K_a, K_b, bias_correct)


def _two_block_cumulant(K_AB, K_A, K_B, bias_correct) -> CumulantTensor:
    if set(K_A.layout.qubits) & set(K_B.layout.qubits):
        raise ValidationError(f"factor layouts {K_A.layout} and {K_B.layout} overlap")
    if set(K_A.layout.qubits) | set(K_B.layout.qubits) != set(K_AB.layout.qubits):
        raise ValidationError(
            f"factors {K_A.layout}, {K_B.layout} do not cover joint layout {K_AB.layout}"
        )
    prod = _on_layout([(K_A.entries, K_A.layout), (K_B.entries, K_B.layout)], K_AB.layout)
    values = K_AB.entries - prod
    if bias_correct:
        if K_AB.shots is None:
            raise ValidationError("bias correction needs the shot count of the joint matrix")
        values = values * bias_correction_factor(K_AB.shots)
    return CumulantTensor(K_AB.layout, values, bias_corrected=bias_correct, shots=K_AB.shots)


def cumulant3(
    K_abc: FidelityMatrix,
    pairs: Sequence[FidelityMatrix],
    singles: Sequence[FidelityMatrix],
) -> CumulantTensor:
    """Third-order cumulant from the joint, its three pair MFMs and three single MFMs.

    Pair and single matrices are matched to ``K_abc`` by qubit id, in any order.
    """
    _check_width(K_abc, 3, "K_abc")
    layout = K_abc.layout
    a, b, c = layout.qubits
    P = _index_by_qubits(pairs)
    S = _index_by_qubits(singles)
    for K in pairs:
        _check_width(K, 2, "pair MFM")
    for K in singles:
        _check_width(K, 1, "single MFM")

    def term(*qubit_groups):
        mats = [_lookup(P if len(g) == 2 else S, g, "MFM") for g in qubit_groups]
        return _on_layout([(K.entries, K.layout) for K in mats], layout)

    values = (
        K_abc.entries
        - (term((a,), (b, c)) + term((c,), (a, b)) + term((b,), (c, a)))
        + 2.0 * term((a,), (b,), (c,))
    )
    return CumulantTensor(layout, values, shots=K_abc.shots)


def reconstruct_order2(
    singles: Sequence[CumulantTensor],
    pairs: Sequence[CumulantTensor],
    layout: QubitLayout,
    *,
    order: int = 2,
    triples: Sequence[CumulantTensor] = (),
) -> FidelityMatrix:
    """Generate an MFM on ``layout`` with every cumulant above ``order`` set to zero.

    Each conditional probability is the sum, over set partitions of the layout
    into blocks of size <= ``order``, of the product of block cumulants. The
    sum is evaluated by peeling off the block that holds the lowest remaining
    position, memoized on the remaining set. The result is flagged raw.
    """
    if order not in (1, 2, 3):
        raise ValidationError(f"reconstruction order must be 1, 2 or 3, got {order}")
    tables: dict[frozenset[int], CumulantTensor] = {}
    for group, size in ((singles, 1), (pairs, 2), (triples, 3)):
        for lam in group:
            if lam.order != size:
                raise ValidationError(f"expected an order-{size} cumulant, got layout {lam.layout}")
            key = frozenset(lam.layout.qubits)
            if not key <= set(layout.qubits):
                raise ValidationError(f"cumulant on {lam.layout} lies outside layout {layout}")
            if key in tables:
                raise ValidationError(f"duplicate cumulant for qubits {sorted(key)}")
            tables[key] = lam
    m = layout.width
    for size in range(1, order + 1):
        for combo in combinations(layout.qubits, size):
            _lookup(tables, combo, f"order-{size} cumulant")

    # block arrays arranged on ascending layout positions
    blocks: dict[tuple[int, ...], np.ndarray] = {}
    for size in range(1, order + 1):
        for pos in combinations(range(m), size):
            lam = tables[frozenset(layout.qubits[p] for p in pos)]
            blocks[pos] = lam.on_order([layout.qubits[p] for p in pos])

    memo: dict[tuple[int, ...], np.ndarray] = {(): np.ones((1, 1))}

    def partial(remaining: tuple[int, ...]) -> np.ndarray:
        if remaining in memo:
            return memo[remaining]
        first, rest = remaining[0], remaining[1:]
        total = np.zeros((1 << len(remaining),) * 2)
        for size in range(0, min(order, len(remaining))):
            for others in combinations(rest, size):
                block = (first, *others)
                left = tuple(p for p in rest if p not in others)
                total += kron_on_positions(
                    [blocks[block], partial(left)], [block, left], remaining
                )
        memo[remaining] = total
        return total

    entries = partial(tuple(range(m)))
    bias = any(t.bias_corrected for t in tables.values())
    return FidelityMatrix(layout, entries, raw=True, bias_corrected=bias)


def tensor_product(factors: Sequence[FidelityMatrix]) -> FidelityMatrix:
    """Kronecker product; the output layout is the concatenation of the factor layouts."""
    if not factors:
        raise ValidationError("tensor_product needs at least one factor")
    qubits: list[int] = []
    for K in factors:
        overlap = set(qubits) & set(K.layout.qubits)
        if overlap:
            raise ValidationError(f"factor layouts overlap on qubits {sorted(overlap)}")
        qubits.extend(K.layout.qubits)
    entries = reduce(np.kron, [K.entries for K in factors])
    shots = {K.shots for K in factors}
    return FidelityMatrix(
        QubitLayout(qubits),
        entries,
        raw=any(K.raw for K in factors),
        bias_corrected=any(K.bias_corrected for K in factors),
        shots=shots.pop() if len(shots) == 1 else None,
        row_tolerance=max(K.row_tolerance for K in factors) * len(factors),
    )


def permute_qubits(K: FidelityMatrix, perm: Sequence[int]) -> FidelityMatrix:
    """Reorder bit positions: new position ``p`` takes old position ``perm[p]``."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(K.width)):
        raise ValidationError(f"{perm} is not a permutation of {K.width} positions")
    layout = QubitLayout(K.layout.qubits[p] for p in perm)
    return K.replace(layout=layout, entries=transpose_positions(K.entries, perm))


def reorder(K: FidelityMatrix, layout: QubitLayout) -> FidelityMatrix:
    """Permute ``K`` so that its layout equals ``layout`` (same qubit set)."""
    if set(layout.qubits) != set(K.layout.qubits) or layout.width != K.width:
        raise ValidationError(f"cannot reorder {K.layout} into {layout}")
    return permute_qubits(K, K.layout.positions(layout.qubits))


def cluster_product(
    clusters: Sequence[tuple[FidelityMatrix, SubsystemSelection]], target: QubitLayout
) -> FidelityMatrix:
    """Tensor product of cluster MFMs, reordered so that its layout is ``target``."""
    seen: list[int] = []
    factors = []
    for K, sel in clusters:
        if sel.parent != target:
            raise ValidationError(f"cluster selection parent {sel.parent} is not target {target}")
        if set(K.layout.qubits) != set(sel.layout.qubits):
            raise ValidationError(f"cluster matrix {K.layout} does not match selection {sel.layout}")
        factors.append(reorder(K, sel.layout))
        seen.extend(sel.layout.qubits)
    if sorted(seen) != sorted(target.qubits) or len(set(seen)) != len(seen):
        raise ValidationError(f"clusters {seen} do not partition target {target}")
    if len(factors) == 1 and factors[0].layout == target:
        return factors[0]
    return reorder(tensor_product(factors), target)


def scf(
    K_AB: FidelityMatrix,
    K_A: FidelityMatrix,
    K_B: FidelityMatrix,
    *,
    bias_correct: bool = False,
) -> tuple[CumulantTensor, float]:
    """Two-block cumulant and its Frobenius norm (the scalar correlation factor).

    ``K_AB``'s layout must list the qubits of A first, then those of B.
    """
    nA, nB = K_A.width, K_B.width
    if K_AB.width != nA + nB:
        raise ValidationError(f"joint width {K_AB.width} != {nA} + {nB}")
    if K_AB.layout.qubits != K_A.layout.qubits + K_B.layout.qubits:
        raise ValidationError(
            f"joint layout {K_AB.layout} must be {K_A.layout} followed by {K_B.layout}; permute first"
        )
    lam = _two_block_cumulant(K_AB, K_A, K_B, bias_correct)
    return lam, lam.norm


def scf_from_joint(
    K_AB: FidelityMatrix, split: int, *, bias_correct: bool = False
) -> tuple[CumulantTensor, float]:
    """SCF with both factors marginalized from ``K_AB`` itself (first ``split`` positions = A)."""
    m = K_AB.width
    if not 1 <= split < m:
        raise ValidationError(f"split {split} must lie in [1, {m - 1}]")
    K_A = marginalize(K_AB, SubsystemSelection(K_AB.layout, range(split)))
    K_B = marginalize(K_AB, SubsystemSelection(K_AB.layout, range(split, m)))
    return scf(K_AB, K_A, K_B, bias_correct=bias_correct)


def scf_by_target_state(lam: CumulantTensor) -> dict[BitString, float]:
    """Frobenius norm of each input-state slice ``lambda(. | x_i)``."""
    norms = np.linalg.norm(lam.values, axis=1)
    w = lam.order
    return {BitString(i, w): float(v) for i, v in enumerate(norms)}
