"""Dense state algebra over labeled tensor-product spaces.

Index convention: the first-listed subsystem is the most significant digit,
so for subsystems ``(a, da), (b, db)`` the basis state ``|i, j>`` sits at flat
index ``i * db + j``. This is the same ordering ``numpy.reshape`` uses in C
order, which lets every operation below work on ``amplitudes.reshape(dims)``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ATOL = 1e-10
SCHMIDT_CUTOFF = 1e-9


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered registry of labeled subsystems."""

    subsystems: tuple[tuple[str, int], ...]

    def __init__(self, subsystems: Iterable[tuple[str, int]] | Mapping[str, int]):
        items = subsystems.items() if isinstance(subsystems, Mapping) else subsystems
        subs = tuple((str(label), int(dim)) for label, dim in items)
        if not subs:
            raise ValueError("layout needs at least one subsystem")
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        for label, dim in subs:
            if dim < 2:
                raise ValueError(f"subsystem {label!r} has dimension {dim}; minimum is 2")
        object.__setattr__(self, "subsystems", subs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r}; layout has {list(self.labels)}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def encode(self, digits: Sequence[int]) -> int:
        """Flat index of a digit tuple (first subsystem most significant)."""
        if len(digits) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} digits, got {len(digits)}")
        index = 0
        for digit, dim in zip(digits, self.dims):
            if not 0 <= digit < dim:
                raise IndexError(f"digit {digit} out of range for dimension {dim}")
            index = index * dim + int(digit)
        return index

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.total_dim:
            raise IndexError(f"index {index} out of range for total dimension {self.total_dim}")
        digits = []
        for dim in reversed(self.dims):
            index, digit = divmod(index, dim)
            digits.append(digit)
        return tuple(reversed(digits))

    def sublayout(self, labels: Iterable[str]) -> SpaceLayout:
        """Layout restricted to ``labels``, kept in this layout's order."""
        wanted = set(labels)
        for label in wanted:
            self.axis(label)
        return SpaceLayout([(l, d) for l, d in self.subsystems if l in wanted])

    def __add__(self, other: SpaceLayout) -> SpaceLayout:
        return SpaceLayout(self.subsystems + other.subsystems)


def _check_same_layout(a: SpaceLayout, b: SpaceLayout) -> None:
    if a != b:
        raise ValueError(f"layout mismatch: {a.labels} vs {b.labels}")


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state over a layout. Amplitudes are stored read-only."""

    layout: SpaceLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.total_dim:
            raise ValueError(
                f"{amps.shape[0]} amplitudes for a layout of dimension {self.layout.total_dim}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"ket is not normalized (norm {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, layout: SpaceLayout, amplitudes) -> Ket:
        """Normalize ``amplitudes`` and wrap them."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm < 1e-12:
            raise ValueError("cannot normalize a zero-norm vector")
        return cls(layout, amps / norm)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amplitudes.reshape(self.layout.dims)

    def kron(self, other: Ket) -> Ket:
        """Product state ``self (x) other`` on the concatenated layout."""
        return Ket(self.layout + other.layout, np.kron(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"Ket(labels={self.layout.labels}, dims={self.layout.dims})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite operator over a layout."""

    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {n}")
        if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0):
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(mat) - 1.0) > ATOL:
            raise ValueError(f"density operator trace is {np.trace(mat)!r}, not 1")
        if np.linalg.eigvalsh(mat).min() < -ATOL:
            raise ValueError("density operator has a negative eigenvalue")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def __repr__(self):
        return f"DensityOperator(labels={self.layout.labels}, dims={self.layout.dims})"


def basis_ket(layout: SpaceLayout, assignment: Mapping[str, int]) -> Ket:
    """Computational basis state with the given per-subsystem indices."""
    unknown = set(assignment) - set(layout.labels)
    if unknown:
        raise KeyError(f"unknown subsystem(s) {sorted(unknown)}")
    missing = [label for label in layout.labels if label not in assignment]
    if missing:
        raise KeyError(f"no basis index given for {missing}")
    index = layout.encode([assignment[label] for label in layout.labels])
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[index] = 1.0
    return Ket(layout, amps)


def superpose(terms: Sequence[tuple[complex, Ket]]) -> Ket:
    """Normalized linear combination ``sum c_i |k_i>``; relative phases are kept."""
    if not terms:
        raise ValueError("superpose needs at least one term")
    layout = terms[0][1].layout
    total = np.zeros(layout.total_dim, dtype=complex)
    for coeff, ket in terms:
        _check_same_layout(layout, ket.layout)
        total += complex(coeff) * ket.amplitudes
    if np.linalg.norm(total) < 1e-12:
        raise ValueError("superposition has zero norm")
    return Ket.from_amplitudes(layout, total)


def inner(a: Ket, b: Ket) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _check_same_layout(a.layout, b.layout)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def ket_fidelity(a: Ket, b: Ket) -> float:
    """``|<a|b>|^2``; insensitive to global phase."""
    return abs(inner(a, b)) ** 2


def density_from_ket(k: Ket) -> DensityOperator:
    return DensityOperator(k.layout, np.outer(k.amplitudes, k.amplitudes.conj()))


def _einsum_trace(tensor: np.ndarray, n: int, keep_axes: Sequence[int]) -> np.ndarray:
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise ValueError("too many subsystems for partial trace")
    rows = list(letters[:n])
    cols = [letters[n + i] if i in keep_axes else rows[i] for i in range(n)]
    out = [rows[i] for i in keep_axes] + [cols[i] for i in keep_axes]
    return np.einsum(f"{''.join(rows)}{''.join(cols)}->{''.join(out)}", tensor)


def _kept_axes(layout: SpaceLayout, keep: Iterable[str]) -> list[int]:
    keep = set(keep)
    if not keep:
        raise ValueError("keep set is empty")
    for label in keep:
        layout.axis(label)
    return [i for i, label in enumerate(layout.labels) if label in keep]


def partial_trace(rho: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    """Trace out every subsystem not in ``keep``."""
    layout = rho.layout
    axes = _kept_axes(layout, keep)
    sub = SpaceLayout([layout.subsystems[i] for i in axes])
    n = len(layout.dims)
    tensor = rho.matrix.reshape(layout.dims + layout.dims)
    reduced = _einsum_trace(tensor, n, axes).reshape(sub.total_dim, sub.total_dim)
    return DensityOperator(sub, reduced)


def reduced_density(k: Ket, keep: Iterable[str]) -> DensityOperator:
    """Same as ``partial_trace(density_from_ket(k), keep)`` without forming ``|k><k|``."""
    layout = k.layout
    axes = _kept_axes(layout, keep)
    rest = [i for i in range(len(layout.dims)) if i not in axes]
    sub = SpaceLayout([layout.subsystems[i] for i in axes])
    mat = np.transpose(k.tensor(), axes + rest).reshape(sub.total_dim, -1)
    return DensityOperator(sub, mat @ mat.conj().T)


def purity(rho: DensityOperator) -> float:
    """``tr(rho^2)``."""
    m = rho.matrix
    return float(np.real(np.sum(m * m.T)))


def fidelity_with_ket(rho: DensityOperator, k: Ket) -> float:
    """``<k|rho|k>``."""
    _check_same_layout(rho.layout, k.layout)
    return float(np.real(np.vdot(k.amplitudes, rho.matrix @ k.amplitudes)))


def schmidt_coefficients(k: Ket, partition: Iterable[str]) -> np.ndarray:
    """Singular values of the amplitude matrix across ``partition | rest``."""
    layout = k.layout
    part = set(partition)
    if not part or part >= set(layout.labels):
        raise ValueError("partition must be a proper, nonempty subset of the labels")
    axes = _kept_axes(layout, part)
    rest = [i for i in range(len(layout.dims)) if i not in axes]
    d_part = int(np.prod([layout.dims[i] for i in axes]))
    mat = np.transpose(k.tensor(), axes + rest).reshape(d_part, -1)
    return np.linalg.svd(mat, compute_uv=False)


def schmidt_entanglement(k: Ket, partition: Iterable[str]) -> int:
    """Schmidt rank across the cut; 1 means a product state."""
    return int(np.sum(schmidt_coefficients(k, partition) > SCHMIDT_CUTOFF))


def embed_operator(op: np.ndarray, label: str, layout: SpaceLayout) -> np.ndarray:
    """Dense matrix of ``op`` acting on one subsystem, identity elsewhere."""
    axis = layout.axis(label)
    op = np.asarray(op, dtype=complex)
    if op.shape != (layout.dims[axis],) * 2:
        raise ValueError(f"operator shape {op.shape} does not fit subsystem {label!r}")
    result = np.eye(1, dtype=complex)
    for i, dim in enumerate(layout.dims):
        result = np.kron(result, op if i == axis else np.eye(dim))
    return result


def apply_local(k: Ket, op: np.ndarray, label: str) -> Ket:
    """Apply a single-subsystem unitary without building the full matrix."""
    axis = k.layout.axis(label)
    tensor = np.tensordot(np.asarray(op, dtype=complex), k.tensor(), axes=([1], [axis]))
    return Ket(k.layout, np.moveaxis(tensor, 0, axis).reshape(-1))


def random_ket(layout: SpaceLayout, rng: np.random.Generator) -> Ket:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    n = layout.total_dim
    return Ket.from_amplitudes(layout, rng.normal(size=n) + 1j * rng.normal(size=n))
