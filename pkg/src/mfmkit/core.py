"""Domain types and bit/index bookkeeping shared by every other module.

Bit convention: position 0 of a :class:`QubitLayout` is the most significant
bit of every rendered bitstring and of every matrix index over that layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


class ValidationError(ValueError):
    """Input violates a structural precondition (widths, layouts, shapes)."""


class NumericalError(ArithmeticError):
    """A numerical operation cannot be carried out (e.g. singular kernel)."""


@dataclass(frozen=True)
class QubitLayout:
    """Ordered list of distinct physical qubit ids."""

    qubits: tuple[int, ...]

    def __init__(self, qubits: Iterable[int]):
        qs = tuple(int(q) for q in qubits)
        if not qs:
            raise ValidationError("layout must contain at least one qubit")
        if any(q < 0 for q in qs):
            raise ValidationError(f"qubit ids must be non-negative: {qs}")
        if len(set(qs)) != len(qs):
            raise ValidationError(f"duplicate qubit ids in layout {qs}")
        object.__setattr__(self, "qubits", qs)

    @property
    def width(self) -> int:
        return len(self.qubits)

    @property
    def dim(self) -> int:
        return 1 << len(self.qubits)

    def __len__(self) -> int:
        return len(self.qubits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.qubits)

    def position(self, qubit: int) -> int:
        try:
            return self.qubits.index(qubit)
        except ValueError:
            raise ValidationError(f"qubit {qubit} not in layout {self.qubits}") from None

    def positions(self, qubits: Iterable[int]) -> tuple[int, ...]:
        return tuple(self.position(q) for q in qubits)

    def concat(self, other: QubitLayout) -> QubitLayout:
        return QubitLayout(self.qubits + other.qubits)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.qubits)) + "}"


@dataclass(frozen=True, order=True)
class BitString:
    """Fixed-width classical word; renders MSB first."""

    value: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValidationError(f"bitstring width must be >= 1, got {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise ValidationError(f"value {self.value} does not fit in {self.width} bits")

    @classmethod
    def from_str(cls, text: str) -> BitString:
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ValidationError(f"not a bitstring: {text!r}")
        return cls(int(text, 2), len(text))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> BitString:
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValidationError(f"bits must be 0/1, got {b!r}")
            value = (value << 1) | b
        return cls(value, len(bits))

    def bit(self, position: int) -> int:
        if not 0 <= position < self.width:
            raise ValidationError(f"position {position} out of range for width {self.width}")
        return (self.value >> (self.width - 1 - position)) & 1

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(self.bit(p) for p in range(self.width))

    def popcount(self) -> int:
        return bin(self.value).count("1")

    def __str__(self) -> str:
        return format(self.value, f"0{self.width}b")


def as_bitstring(x: BitString | str) -> BitString:
    return x if isinstance(x, BitString) else BitString.from_str(x)


def index_of(x: BitString | str, layout: QubitLayout | None = None) -> int:
    """Row/column index of ``x``; checks the width against ``layout`` when given."""
    x = as_bitstring(x)
    if layout is not None and x.width != layout.width:
        raise ValidationError(f"bitstring {x} has width {x.width}, layout has {layout.width}")
    return x.value


def all_bitstrings(width: int) -> list[BitString]:
    return [BitString(v, width) for v in range(1 << width)]


def restrict_bits(x: BitString | str, positions: Sequence[int]) -> BitString:
    """Sub-word of ``x`` at ``positions``, in the order given."""
    x = as_bitstring(x)
    if not positions:
        raise ValidationError("empty position list")
    if len(set(positions)) != len(positions):
        raise ValidationError(f"duplicate positions {list(positions)}")
    return BitString.from_bits([x.bit(p) for p in positions])


@dataclass(frozen=True)
class SubsystemSelection:
    """An ordered choice of positions inside a parent layout."""

    parent: QubitLayout
    positions: tuple[int, ...]

    def __init__(self, parent: QubitLayout, positions: Iterable[int]):
        pos = tuple(int(p) for p in positions)
        if not pos:
            raise ValidationError("empty subsystem selection")
        if len(set(pos)) != len(pos):
            raise ValidationError(f"duplicate positions in selection {pos}")
        for p in pos:
            if not 0 <= p < parent.width:
                raise ValidationError(f"position {p} out of range for layout {parent}")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def of_qubits(cls, parent: QubitLayout, qubits: Iterable[int]) -> SubsystemSelection:
        return cls(parent, parent.positions(qubits))

    @property
    def layout(self) -> QubitLayout:
        return QubitLayout(self.parent.qubits[p] for p in self.positions)

    @property
    def width(self) -> int:
        return len(self.positions)

    @property
    def complement(self) -> tuple[int, ...]:
        chosen = set(self.positions)
        return tuple(p for p in range(self.parent.width) if p not in chosen)


def _frozen_array(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FidelityMatrix:
    """Row-stochastic matrix with ``entries[i, j] = p(x_j | x_i)``.

    ``raw`` marks reconstructions that are not guaranteed to be stochastic;
    such matrices skip the stochasticity check.
    """

    layout: QubitLayout
    entries: np.ndarray
    raw: bool = False
    bias_corrected: bool = False
    projected: bool = False
    shots: int | None = None
    row_tolerance: float = 1e-9

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        object.__setattr__(self, "entries", entries)
        d = self.layout.dim
        if entries.shape != (d, d):
            raise ValidationError(
                f"matrix shape {entries.shape} does not match layout {self.layout} (expected {d}x{d})"
            )
        if not np.all(np.isfinite(entries)):
            raise ValidationError("matrix has non-finite entries")
        if not self.raw:
            tol = self.row_tolerance
            if entries.min() < -tol or entries.max() > 1 + tol:
                raise ValidationError("stochastic matrix has entries outside [0, 1]")
            dev = np.abs(entries.sum(axis=1) - 1.0).max()
            if dev > tol:
                raise ValidationError(f"row sums deviate from 1 by {dev:.3g} (tolerance {tol:g})")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def width(self) -> int:
        return self.layout.width

    def fidelities(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def replace(self, **changes) -> FidelityMatrix:
        fields = dict(
            layout=self.layout,
            entries=self.entries,
            raw=self.raw,
            bias_corrected=self.bias_corrected,
            projected=self.projected,
            shots=self.shots,
            row_tolerance=self.row_tolerance,
        )
        fields.update(changes)
        return FidelityMatrix(**fields)

    @classmethod
    def identity(cls, layout: QubitLayout) -> FidelityMatrix:
        return cls(layout, np.eye(layout.dim))

    @classmethod
    def uniform(cls, layout: QubitLayout) -> FidelityMatrix:
        d = layout.dim
        return cls(layout, np.full((d, d), 1.0 / d))

    def is_stochastic(self, tol: float | None = None) -> bool:
        tol = self.row_tolerance if tol is None else tol
        e = self.entries
        return bool(
            e.min() >= -tol and e.max() <= 1 + tol and np.abs(e.sum(axis=1) - 1).max() <= tol
        )


def project_stochastic(K: FidelityMatrix) -> FidelityMatrix:
    """Clip entries to [0, 1] and renormalize every row."""
    e = np.clip(K.entries, 0.0, 1.0)
    sums = e.sum(axis=1, keepdims=True)
    d = K.dim
    # an all-clipped row carries no information; fall back to uniform
    e = np.where(sums > 0, e / np.where(sums > 0, sums, 1.0), 1.0 / d)
    return K.replace(entries=e, raw=False, projected=True)


@dataclass(frozen=True, eq=False)
class CountsRecord:
    """Histogram of observed outcomes for one prepared state.

    The histogram is stored densely (length ``2**width``). ``spectators``
    lists the layout positions whose preparation was randomized, in which
    case the corresponding bits of ``prepared`` carry no meaning.
    """

    prepared: BitString
    histogram: np.ndarray
    spectators: tuple[int, ...] | None = None

    def __post_init__(self):
        h = np.asarray(self.histogram)
        if h.ndim != 1 or h.shape[0] != 1 << self.prepared.width:
            raise ValidationError(
                f"histogram length {h.shape} does not match width {self.prepared.width}"
            )
        if not np.issubdtype(h.dtype, np.integer):
            if not np.all(np.equal(np.mod(h, 1), 0)):
                raise ValidationError("counts must be integers")
        if (h < 0).any():
            raise ValidationError("counts must be non-negative")
        object.__setattr__(self, "histogram", _frozen_array(h, dtype=np.int64))
        if self.shots < 1:
            raise ValidationError(f"record for {self.prepared} has no shots")
        if self.spectators is not None:
            sp = tuple(sorted(int(p) for p in self.spectators))
            if any(not 0 <= p < self.width for p in sp) or len(set(sp)) != len(sp):
                raise ValidationError(f"invalid spectator positions {self.spectators}")
            object.__setattr__(self, "spectators", sp)

    @classmethod
    def from_counts(
        cls,
        prepared: BitString | str,
        counts: Mapping[BitString | str, int],
        spectators: Sequence[int] | None = None,
    ) -> CountsRecord:
        prepared = as_bitstring(prepared)
        hist = np.zeros(1 << prepared.width, dtype=np.int64)
        for key, c in counts.items():
            k = as_bitstring(key)
            if k.width != prepared.width:
                raise ValidationError(
                    f"outcome {k} has width {k.width}, prepared state {prepared} has {prepared.width}"
                )
            if int(c) != c or c < 0:
                raise ValidationError(f"count for {k} must be a non-negative integer, got {c!r}")
            hist[k.value] += int(c)
        return cls(prepared, hist, None if spectators is None else tuple(spectators))

    @property
    def width(self) -> int:
        return self.prepared.width

    @property
    def shots(self) -> int:
        return int(self.histogram.sum())

    @property
    def counts(self) -> dict[BitString, int]:
        w = self.width
        return {BitString(int(i), w): int(self.histogram[i]) for i in np.flatnonzero(self.histogram)}


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over the basis states of a layout."""

    layout: QubitLayout
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen_array(self.probs)
        object.__setattr__(self, "probs", p)
        if p.shape != (self.layout.dim,):
            raise ValidationError(f"distribution length {p.shape} does not match layout {self.layout}")
        if (p < 0).any():
            raise ValidationError("distribution has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError(f"distribution sums to {p.sum():.12g}, not 1")


# -- array-level helpers -------------------------------------------------------


def transpose_positions(entries: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder the bit positions of a 2^m x 2^m array.

    New position ``p`` takes old position ``order[p]``, on both the row and
    the column index.
    """
    m = len(order)
    if list(order) == list(range(m)):
        return np.asarray(entries)
    t = np.asarray(entries).reshape((2,) * (2 * m))
    axes = list(order) + [m + o for o in order]
    return t.transpose(axes).reshape(1 << m, 1 << m)


def transpose_vector_positions(vec: np.ndarray, order: Sequence[int]) -> np.ndarray:
    m = len(order)
    if list(order) == list(range(m)):
        return np.asarray(vec)
    return np.asarray(vec).reshape((2,) * m).transpose(list(order)).reshape(1 << m)


def kron_on_positions(
    blocks: Sequence[np.ndarray], block_positions: Sequence[Sequence[int]], target: Sequence[int]
) -> np.ndarray:
    """Kronecker product of blocks, each living on its own positions, laid out on ``target``.

    ``target`` must be a permutation of the concatenated block positions.
    """
    concat = [p for ps in block_positions for p in ps]
    if sorted(concat) != sorted(target) or len(set(concat)) != len(concat):
        raise ValidationError(f"block positions {concat} do not partition {list(target)}")
    full = reduce(np.kron, blocks, np.ones((1, 1)))
    where = {p: i for i, p in enumerate(concat)}
    return transpose_positions(full, [where[p] for p in target])


def kron_vectors_on_positions(
    vectors: Sequence[np.ndarray], block_positions: Sequence[Sequence[int]], target: Sequence[int]
) -> np.ndarray:
    concat = [p for ps in block_positions for p in ps]
    if sorted(concat) != sorted(target) or len(set(concat)) != len(concat):
        raise ValidationError(f"block positions {concat} do not partition {list(target)}")
    full = reduce(np.kron, vectors, np.ones(1))
    where = {p: i for i, p in enumerate(concat)}
    return transpose_vector_positions(full, [where[p] for p in target])


__all__ = [
    "BitString",
    "CountsRecord",
    "Distribution",
    "FidelityMatrix",
    "NumericalError",
    "QubitLayout",
    "SubsystemSelection",
    "ValidationError",
    "all_bitstrings",
    "as_bitstring",
    "index_of",
    "kron_on_positions",
    "kron_vectors_on_positions",
    "project_stochastic",
    "restrict_bits",
    "transpose_positions",
    "transpose_vector_positions",
]
