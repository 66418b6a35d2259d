"""Pointer-register measurement.

A measurement couples an object register to a pointer register through a
controlled shift: object value ``r`` moves the pointer from ``a`` to
``(a + alpha_r) mod pointer_dim``. With the pointer prepared at 0 this writes
``alpha_r`` into the pointer and leaves the object alone, so a superposed
object ends up entangled with the pointer rather than reduced.

The collapse mode is the orthodox alternative, kept for contrast: it draws
an outcome with Born weights and projects.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ensembleq.hilbert import (
    ATOL,
    Ket,
    SpaceLayout,
    apply_local,
    basis_ket,
    embed_operator,
    reduced_density,
)

ZERO_PROBABILITY = 1e-12


class Mode(str, enum.Enum):
    UNITARY = "unitary"
    COLLAPSE = "collapse"


class PointerNotReadyWarning(UserWarning):
    """The pointer register had weight away from its zero reading."""


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Object register, its measurement basis, and the pointer that records it.

    ``readout_map[r]`` is the pointer value written for object outcome ``r``.
    ``basis`` holds the measurement basis vectors as columns (computational
    basis when omitted). ``disturbance`` is an optional unitary applied to
    the object after the coupling, for measurements that do disturb it.
    ``irrelevant_label`` names a register of device quantum numbers that the
    coupling carries along unchanged.
    """

    object_label: str
    object_dim: int
    pointer_label: str
    pointer_dim: int
    readout_map: tuple[int, ...] | None = None
    irrelevant_label: str | None = None
    mode: Mode = Mode.UNITARY
    basis: np.ndarray | None = field(default=None, repr=False)
    disturbance: np.ndarray | None = field(default=None, repr=False)
    outcome_names: tuple[str, ...] | None = None

    def __post_init__(self):
        r = self.object_dim
        if r < 2:
            raise ValueError("object basis needs at least two outcomes")
        if self.pointer_dim < r + 1:
            raise ValueError(f"pointer dimension {self.pointer_dim} < object size + 1 = {r + 1}")
        alphas = tuple(range(1, r + 1)) if self.readout_map is None else tuple(self.readout_map)
        if len(alphas) != r:
            raise ValueError(f"readout map has {len(alphas)} entries for {r} outcomes")
        if len(set(alphas)) != r:
            raise ValueError(f"readout map {alphas} is not injective")
        if any(not 1 <= a <= self.pointer_dim - 1 for a in alphas):
            raise ValueError(f"readout values must lie in [1, {self.pointer_dim - 1}]")
        object.__setattr__(self, "readout_map", tuple(int(a) for a in alphas))
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("basis", "disturbance"):
            mat = getattr(self, name)
            if mat is None:
                continue
            mat = np.array(mat, dtype=complex)
            if mat.shape != (r, r) or not np.allclose(mat.conj().T @ mat, np.eye(r), atol=ATOL):
                raise ValueError(f"{name} must be a {r}x{r} unitary")
            mat.flags.writeable = False
            object.__setattr__(self, name, mat)
        if self.outcome_names is not None and len(self.outcome_names) != r:
            raise ValueError("need one outcome name per object basis state")
        if self.irrelevant_label in (self.object_label, self.pointer_label):
            raise ValueError("irrelevant register must be distinct from object and pointer")
        if self.object_label == self.pointer_label:
            raise ValueError("object and pointer must be different registers")

    def outcome_name(self, r: int) -> str:
        return self.outcome_names[r] if self.outcome_names else str(r)

    def with_mode(self, mode: Mode | str) -> MeasurementModel:
        return MeasurementModel(
            self.object_label,
            self.object_dim,
            self.pointer_label,
            self.pointer_dim,
            self.readout_map,
            self.irrelevant_label,
            Mode(mode),
            self.basis,
            self.disturbance,
            self.outcome_names,
        )

    def check_layout(self, layout: SpaceLayout) -> None:
        for label, dim in ((self.object_label, self.object_dim), (self.pointer_label, self.pointer_dim)):
            if label not in layout:
                raise ValueError(f"layout has no register {label!r}")
            if layout.dim(label) != dim:
                raise ValueError(f"register {label!r} has dimension {layout.dim(label)}, model expects {dim}")
        if self.irrelevant_label is not None and self.irrelevant_label not in layout:
            raise ValueError(f"layout has no register {self.irrelevant_label!r}")


@dataclass(frozen=True, eq=False)
class Unitary:
    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {n}")
        if not np.allclose(mat.conj().T @ mat, np.eye(n), atol=ATOL, rtol=0):
            raise ValueError("matrix is not unitary")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def apply(self, k: Ket) -> Ket:
        if k.layout != self.layout:
            raise ValueError("layout mismatch")
        return Ket(self.layout, self.matrix @ k.amplitudes)

    def __matmul__(self, other: Unitary) -> Unitary:
        return Unitary(self.layout, self.matrix @ other.matrix)


def build_pointer_unitary(model: MeasurementModel, layout: SpaceLayout) -> Unitary:
    """Dense matrix of the measurement coupling on ``layout``.

    Built from the index permutation of the controlled shift, conjugated by
    the basis change. ``apply_measurement`` computes the same map with tensor
    operations and never forms this matrix.
    """
    model.check_layout(layout)
    obj, ptr = layout.axis(model.object_label), layout.axis(model.pointer_label)
    n = layout.total_dim
    digits = np.array(np.unravel_index(np.arange(n), layout.dims))
    shifted = digits.copy()
    alphas = np.array(model.readout_map)
    shifted[ptr] = (digits[ptr] + alphas[digits[obj]]) % model.pointer_dim
    target = np.ravel_multi_index(tuple(shifted), layout.dims)
    shift = np.zeros((n, n), dtype=complex)
    shift[target, np.arange(n)] = 1.0
    mat = shift
    if model.basis is not None:
        b = embed_operator(model.basis, model.object_label, layout)
        mat = b @ mat @ b.conj().T
    if model.disturbance is not None:
        mat = embed_operator(model.disturbance, model.object_label, layout) @ mat
    return Unitary(layout, mat)


def _to_measurement_basis(state: Ket, model: MeasurementModel) -> Ket:
    if model.basis is None:
        return state
    return apply_local(state, model.basis.conj().T, model.object_label)


def _from_measurement_basis(state: Ket, model: MeasurementModel) -> Ket:
    if model.basis is None:
        return state
    return apply_local(state, model.basis, model.object_label)


def _shift_pointer(state: Ket, model: MeasurementModel) -> Ket:
    layout = state.layout
    obj, ptr = layout.axis(model.object_label), layout.axis(model.pointer_label)
    tensor = np.moveaxis(state.tensor(), (obj, ptr), (0, 1))
    out = np.empty_like(tensor)
    for r, alpha in enumerate(model.readout_map):
        out[r] = np.roll(tensor[r], alpha, axis=0)
    return Ket(layout, np.moveaxis(out, (0, 1), (obj, ptr)).reshape(-1))


def _couple(state: Ket, model: MeasurementModel) -> Ket:
    out = _from_measurement_basis(_shift_pointer(_to_measurement_basis(state, model), model), model)
    if model.disturbance is not None:
        out = apply_local(out, model.disturbance, model.object_label)
    return out


def _warn_if_pointer_set(state: Ket, model: MeasurementModel) -> None:
    p0 = register_distribution(state, model.pointer_label)[0]
    if p0 < 1.0 - 1e-10:
        warnings.warn(
            f"pointer {model.pointer_label!r} is not at its zero reading "
            f"(weight {1.0 - p0:.3g} elsewhere); the shift is applied anyway",
            PointerNotReadyWarning,
            stacklevel=3,
        )


def apply_measurement(state: Ket, model: MeasurementModel) -> Ket:
    """Unitary premeasurement: entangle the pointer with the object.

    ``sum_r c_r |r>|0>  ->  sum_r c_r |r>|alpha_r>``; linear in the input.
    """
    if model.mode is not Mode.UNITARY:
        raise ValueError("apply_measurement needs a model in unitary mode")
    model.check_layout(state.layout)
    _warn_if_pointer_set(state, model)
    return _couple(state, model)


def register_distribution(state: Ket, label: str) -> np.ndarray:
    """Born probabilities of each computational basis value of one register."""
    axis = state.layout.axis(label)
    weights = np.abs(np.moveaxis(state.tensor(), axis, 0)) ** 2
    return weights.reshape(weights.shape[0], -1).sum(axis=1)


def pointer_distribution(state: Ket, pointer_label: str) -> dict[int, float]:
    """Probability of every reading of a register; the diagonal of its reduced state."""
    probs = register_distribution(state, pointer_label)
    return {value: float(p) for value, p in enumerate(probs)}


def outcome_distribution(state: Ket, model: MeasurementModel) -> np.ndarray:
    """Born weights ``|c_r|^2`` of the object in the model's measurement basis."""
    model.check_layout(state.layout)
    return register_distribution(_to_measurement_basis(state, model), model.object_label)


def _project(state: Ket, label: str, value: int) -> tuple[float, np.ndarray]:
    axis = state.layout.axis(label)
    if not 0 <= value < state.layout.dims[axis]:
        raise IndexError(f"value {value} out of range for register {label!r}")
    tensor = np.moveaxis(state.tensor(), axis, 0).copy()
    mask = np.arange(tensor.shape[0]) != value
    tensor[mask] = 0.0
    amps = np.moveaxis(tensor, 0, axis).reshape(-1)
    return float(np.vdot(amps, amps).real), amps


def condition_on_outcome(state: Ket, label: str, value: int) -> Ket:
    """Sub-ensemble selection: keep the members showing ``value`` on ``label``.

    This is a new preparation (post-selection on a recorded reading), not a
    dynamical change of the original ensemble.
    """
    prob, amps = _project(state, label, value)
    if prob <= ZERO_PROBABILITY:
        raise ValueError(f"outcome {label}={value} has probability {prob:.3g}; cannot condition on it")
    return Ket.from_amplitudes(state.layout, amps)


def condition_on_measurement(state: Ket, model: MeasurementModel, r: int) -> Ket:
    """``condition_on_outcome`` for object outcome ``r`` in the model's basis."""
    rotated = _to_measurement_basis(state, model)
    return _from_measurement_basis(condition_on_outcome(rotated, model.object_label, r), model)


def collapse_branches(state: Ket, model: MeasurementModel) -> list[tuple[int, float, Ket]]:
    """Every collapse outcome with nonzero weight: ``(r, probability, post_state)``.

    The post state is the normalized projection onto object value ``r`` with
    the pointer moved to ``alpha_r``. Registers other than the object and
    pointer are left as they are.
    """
    model.check_layout(state.layout)
    rotated = _to_measurement_basis(state, model)
    branches = []
    for r in range(model.object_dim):
        prob, amps = _project(rotated, model.object_label, r)
        if prob <= ZERO_PROBABILITY:
            continue
        projected = _from_measurement_basis(Ket.from_amplitudes(state.layout, amps), model)
        branches.append((r, prob, _couple(projected, model)))
    return branches


def collapse_measurement(
    state: Ket, model: MeasurementModel, rng: np.random.Generator
) -> tuple[int, Ket]:
    """Orthodox projective measurement with a Born-weighted random outcome."""
    if model.mode is not Mode.COLLAPSE:
        raise ValueError("collapse_measurement needs a model in collapse mode")
    model.check_layout(state.layout)
    rotated = _to_measurement_basis(state, model)
    probs = register_distribution(rotated, model.object_label)
    probs = np.where(probs <= ZERO_PROBABILITY, 0.0, probs)
    cdf = np.cumsum(probs / probs.sum())
    cdf[np.flatnonzero(probs)[-1]:] = 1.0
    r = int(np.searchsorted(cdf, rng.random(), side="right"))
    _, amps = _project(rotated, model.object_label, r)
    projected = _from_measurement_basis(Ket.from_amplitudes(state.layout, amps), model)
    return r, _couple(projected, model)


def collapse_mixture(state: Ket, model: MeasurementModel) -> np.ndarray:
    """Ensemble summary of collapse outcomes: ``sum_r p_r |r><r|`` on the object register.

    Expressed in the computational basis of the object register.
    """
    dim = model.object_dim
    mix = np.zeros((dim, dim), dtype=complex)
    for _, prob, post in collapse_branches(state, model):
        mix += prob * reduced_density(post, [model.object_label]).matrix
    return mix


def eigenstate_input(
    layout: SpaceLayout, model: MeasurementModel, r: int, others: Mapping[str, int] | None = None
) -> Ket:
    """``|b_r>`` on the object, pointer at 0, other registers at ``others`` (default 0)."""
    assignment = {label: 0 for label in layout.labels}
    assignment.update(others or {})
    assignment[model.pointer_label] = 0
    assignment[model.object_label] = r
    return _from_measurement_basis(basis_ket(layout, assignment), model)
