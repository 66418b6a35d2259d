"""Worked measurement experiments as register circuits.

Stern-Gerlach registers (index 0 is the initial value of every register)::

    spin    2   up, down
    path    3   psi, psi_up, psi_down
    light   2   light, no_light        (no_light = beam not reflected back)
    friend  3   unset, F_up, F_down
    record  3   none, up, down
    wigner  2   unset, set

Every step is a controlled shift ``target += shift[control] (mod dim)``, i.e.
a real permutation matrix, so no phase bookkeeping is needed.

Registered scenario ids, in listing order: ``sg-basic``, ``sg-recombine``,
``sg-record``, ``wigner-friend``, ``cat``. Each scenario is a list of steps;
a ``Readout`` step reads one register through its own meter register
(``meter_<name>``), which collapse mode writes into and unitary mode leaves
at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ensembleq.hilbert import (
    DensityOperator,
    Ket,
    SpaceLayout,
    basis_ket,
    fidelity_with_ket,
    ket_fidelity,
    purity,
    reduced_density,
    schmidt_entanglement,
    superpose,
)
from ensembleq.measurement import (
    MeasurementModel,
    Mode,
    apply_measurement,
    collapse_measurement,
    condition_on_outcome,
    outcome_distribution,
    pointer_distribution,
)

SG_REGISTERS = (
    ("spin", 2),
    ("path", 3),
    ("light", 2),
    ("friend", 3),
    ("record", 3),
    ("wigner", 2),
)
SG_LAYOUT = SpaceLayout(SG_REGISTERS)
BASIS_NAMES = {
    "spin": ("up", "down"),
    "path": ("psi", "psi_up", "psi_down"),
    "light": ("light", "no_light"),
    "friend": ("unset", "F_up", "F_down"),
    "record": ("none", "up", "down"),
    "wigner": ("unset", "set"),
    "cat": ("live", "dead"),
    "db": ("unset", "cl", "cd"),
}
ENVIRONMENT = ("light", "friend", "record", "wigner")

CAT_LAYOUT = SpaceLayout([("cat", 2), ("db", 3)])

SPIN_X_BASIS = np.array([[1, 1], [1, -1]]) / np.sqrt(2)

_SUPPORT_TOL = 1e-12


def _controlled_shift(state: Ket, control: str, target: str, shifts: Sequence[int]) -> Ket:
    layout = state.layout
    c, t = layout.axis(control), layout.axis(target)
    tensor = np.moveaxis(state.tensor(), (c, t), (0, 1))
    out = np.empty_like(tensor)
    for value, shift in enumerate(shifts):
        out[value] = np.roll(tensor[value], shift, axis=0)
    return Ket(layout, np.moveaxis(out, (0, 1), (c, t)).reshape(-1))


def _require_value(state: Ket, label: str, value: int, op: str) -> None:
    probs = pointer_distribution(state, label)
    if probs[value] < 1.0 - _SUPPORT_TOL:
        name = BASIS_NAMES.get(label, ())[value:value + 1] or (value,)
        raise ValueError(
            f"{op}: register {label!r} must be {name[0]!r} on the support of the state "
            f"(weight {1.0 - probs[value]:.3g} elsewhere)"
        )


def sg_state(spin: Ket | None = None) -> Ket:
    """SG registers with the given spin state (default up) and every other register at index 0."""
    tensor = np.zeros(SG_LAYOUT.dims, dtype=complex)
    tensor[(slice(None),) + (0,) * (len(SG_REGISTERS) - 1)] = (1, 0) if spin is None else spin.amplitudes
    return Ket(SG_LAYOUT, tensor.reshape(-1))


def sg_prepare() -> Ket:
    """``|->  (x) |psi>`` with the environment registers at index 0."""
    spin_layout = SpaceLayout([("spin", 2)])
    right = superpose([(1 / np.sqrt(2), basis_ket(spin_layout, {"spin": 0})),
                       (1 / np.sqrt(2), basis_ket(spin_layout, {"spin": 1}))])
    return sg_state(right)


def sg_split(state: Ket) -> Ket:
    """Spin-dependent deflection: ``(up, psi) -> (up, psi_up)``, ``(down, psi) -> (down, psi_down)``."""
    _require_value(state, "path", 0, "sg_split")
    return _controlled_shift(state, "spin", "path", (1, 2))


def sg_recombine(state: Ket) -> Ket:
    """Bring both deflected paths back to ``psi``; inverse of ``sg_split``."""
    return _controlled_shift(state, "spin", "path", (-1, -2))


def sg_with_record(state: Ket) -> Ket:
    """The device keeps a which-path record: ``record += path``."""
    _require_value(state, "record", 0, "sg_with_record")
    return _controlled_shift(state, "path", "record", (0, 1, 2))


def wigner_friend_measure(state: Ket) -> Ket:
    """Friend probes the up path with light and registers the echo.

    ``psi_down`` flips light to ``no_light``; the friend's brain then goes to
    ``F_up`` on ``light`` and ``F_down`` on ``no_light``.
    """
    _require_value(state, "light", 0, "wigner_friend_measure")
    _require_value(state, "friend", 0, "wigner_friend_measure")
    state = _controlled_shift(state, "path", "light", (0, 0, 1))
    return _controlled_shift(state, "light", "friend", (1, 2))


def friend_reduced_state(state: Ket) -> DensityOperator:
    """Particle state with the environment traced out (spin and path kept)."""
    return reduced_density(state, ["spin", "path"])


def sg_branch(spin: int, path: int, **environment: int) -> Ket:
    """Basis state of the SG registers, environment at 0 unless given."""
    assignment = {label: 0 for label in SG_LAYOUT.labels}
    assignment.update(spin=spin, path=path, **environment)
    return basis_ket(SG_LAYOUT, assignment)


def cat_prepare() -> Ket:
    """``(|live> + |dead>)/sqrt(2)`` with the detector/brain register unset."""
    return superpose([(1.0, basis_ket(CAT_LAYOUT, {"cat": 0, "db": 0})),
                      (1.0, basis_ket(CAT_LAYOUT, {"cat": 1, "db": 0}))])


CAT_DETECTOR = MeasurementModel("cat", 2, "db", 3, readout_map=(1, 2), outcome_names=BASIS_NAMES["cat"])


def cat_entangle(state: Ket) -> Ket:
    """Detector-and-brain premeasurement: live -> ``cl``, dead -> ``cd``."""
    return apply_measurement(state, CAT_DETECTOR)


# ---------------------------------------------------------------------------
# scenario registry


@dataclass(frozen=True)
class Evolve:
    name: str
    fn: Callable[[Ket], Ket] = field(repr=False)


@dataclass(frozen=True)
class Readout:
    """Read ``register`` in ``basis`` through meter register ``meter_<name>``."""

    name: str
    register: str
    outcome_names: tuple[str, ...]
    basis: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def meter(self) -> str:
        return f"meter_{self.name}"

    def model(self, mode: Mode | str = Mode.UNITARY) -> MeasurementModel:
        r = len(self.outcome_names)
        return MeasurementModel(
            self.register, r, self.meter, r + 1, mode=mode, basis=self.basis,
            outcome_names=self.outcome_names,
        )


@dataclass(frozen=True)
class Scenario:
    id: str
    description: str
    base_layout: SpaceLayout
    prepare: Callable[[], Ket] = field(repr=False)
    steps: tuple[Evolve | Readout, ...]
    intermediate_readout: bool = False

    @property
    def readouts(self) -> tuple[Readout, ...]:
        return tuple(s for s in self.steps if isinstance(s, Readout))

    @property
    def layout(self) -> SpaceLayout:
        meters = SpaceLayout([(r.meter, len(r.outcome_names) + 1) for r in self.readouts])
        return self.base_layout + meters

    def initial_state(self) -> Ket:
        meters = [basis_ket(SpaceLayout([(r.meter, len(r.outcome_names) + 1)]), {r.meter: 0})
                  for r in self.readouts]
        state = self.prepare()
        for m in meters:
            state = state.kron(m)
        return state

    def stages(self) -> list[int]:
        """Stage index of each readout: number of evolution steps before it."""
        stages, stage = [], 0
        for step in self.steps:
            if isinstance(step, Evolve):
                stage += 1
            else:
                stages.append(stage)
        return stages


def _readout(name: str, register: str, basis=None, names=None) -> Readout:
    return Readout(name, register, tuple(names or BASIS_NAMES[register]), basis)


_SPIN_X = ("plus", "minus")

SCENARIO_IDS = ("sg-basic", "sg-recombine", "sg-record", "wigner-friend", "cat")


def get_scenario(scenario_id: str, *, intermediate_readout: bool = False) -> Scenario:
    """Build a registered scenario.

    ``intermediate_readout`` (``sg-recombine`` only) reads the path register
    between splitting and recombining, which is where the two modes part ways.
    """
    if scenario_id not in SCENARIO_IDS:
        raise KeyError(f"unknown scenario {scenario_id!r}; registered: {', '.join(SCENARIO_IDS)}")
    if intermediate_readout and scenario_id != "sg-recombine":
        raise ValueError("intermediate_readout is only defined for sg-recombine")
    split, recombine = Evolve("split", sg_split), Evolve("recombine", sg_recombine)
    spin_x = _readout("spin_x", "spin", SPIN_X_BASIS, _SPIN_X)
    if scenario_id == "sg-basic":
        return Scenario(scenario_id, "prepare |->|psi>, read spin along z",
                        SG_LAYOUT, sg_prepare, (_readout("spin", "spin"),))
    if scenario_id == "sg-recombine":
        middle = (_readout("path", "path"),) if intermediate_readout else ()
        return Scenario(scenario_id, "split, recombine, read spin along x",
                        SG_LAYOUT, sg_prepare, (split,) + middle + (recombine, spin_x),
                        intermediate_readout)
    if scenario_id == "sg-record":
        return Scenario(scenario_id, "split, keep a which-path record, recombine, read spin along x",
                        SG_LAYOUT, sg_prepare,
                        (split, Evolve("record", sg_with_record), recombine, spin_x))
    if scenario_id == "wigner-friend":
        return Scenario(scenario_id, "split, friend probes the up path, read friend and spin",
                        SG_LAYOUT, sg_prepare,
                        (split, Evolve("friend", wigner_friend_measure),
                         _readout("friend", "friend"), _readout("spin", "spin")))
    return Scenario(scenario_id, "cat entangled with detector/brain, read the detector",
                    CAT_LAYOUT, cat_prepare, (Evolve("entangle", cat_entangle), _readout("db", "db")))


# ---------------------------------------------------------------------------
# single-pass reports


@dataclass
class ScenarioReport:
    scenario: str
    mode: str
    seed: int | None
    final_state: Ket
    distributions: dict[str, dict[str, float]] = field(default_factory=dict)
    outcomes: dict[str, str] = field(default_factory=dict)
    reduced: dict[str, DensityOperator] = field(default_factory=dict)
    purities: dict[str, float] = field(default_factory=dict)
    fidelities: dict[str, float] = field(default_factory=dict)
    schmidt_ranks: dict[str, int] = field(default_factory=dict)
    conditioned: dict[str, DensityOperator] = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready view; complex matrices become ``[re, im]`` pairs."""
        def mat(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]

        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "seed": self.seed,
            "labels": list(self.final_state.layout.labels),
            "dims": list(self.final_state.layout.dims),
            "distributions": self.distributions,
            "outcomes": self.outcomes,
            "reduced": {k: {"labels": list(v.layout.labels), "matrix": mat(v.matrix)}
                        for k, v in self.reduced.items()},
            "purities": self.purities,
            "fidelities": self.fidelities,
            "schmidt_ranks": self.schmidt_ranks,
            "conditioned": {k: {"labels": list(v.layout.labels), "matrix": mat(v.matrix)}
                            for k, v in self.conditioned.items()},
        }


def _named(probs, names) -> dict[str, float]:
    return {name: float(p) for name, p in zip(names, probs)}


def run_scenario(scenario: Scenario | str, mode: Mode | str = Mode.UNITARY, seed: int = 0) -> ScenarioReport:
    """One pass through a scenario.

    Unitary mode: readouts report the Born distribution of the state at that
    point and leave the state alone. Collapse mode: each readout is a
    ``collapse_measurement`` drawn from ``numpy.random.default_rng(seed)``.
    """
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    mode = Mode(mode)
    rng = np.random.default_rng(seed)
    state = scenario.initial_state()
    report = ScenarioReport(scenario.id, mode.value, seed if mode is Mode.COLLAPSE else None, state)
    for step in scenario.steps:
        if isinstance(step, Evolve):
            state = step.fn(state)
            continue
        model = step.model(mode)
        report.distributions[step.name] = _named(outcome_distribution(state, model), step.outcome_names)
        if mode is Mode.COLLAPSE:
            r, state = collapse_measurement(state, model, rng)
            report.outcomes[step.name] = step.outcome_names[r]
    report.final_state = state
    if scenario.base_layout == SG_LAYOUT:
        particle = friend_reduced_state(state)
        spin = reduced_density(state, ["spin"])
        report.reduced.update(particle=particle, spin=spin)
        report.purities.update(particle=purity(particle), spin=purity(spin))
        plus = Ket(spin.layout, SPIN_X_BASIS[:, 0])
        report.fidelities["spin_plus"] = fidelity_with_ket(spin, plus)
        for label in ("spin", "friend", "wigner", "record"):
            report.schmidt_ranks[label] = schmidt_entanglement(state, [label])
    return report


def cat_scenario() -> ScenarioReport:
    """Detector distribution, cat reduced state, and both conditioned sub-ensembles."""
    state = cat_entangle(cat_prepare())
    report = ScenarioReport("cat", Mode.UNITARY.value, None, state)
    report.distributions["db"] = _named(pointer_distribution(state, "db").values(), BASIS_NAMES["db"])
    cat = reduced_density(state, ["cat"])
    report.reduced["cat"] = cat
    report.purities["cat"] = purity(cat)
    report.schmidt_ranks["cat"] = schmidt_entanglement(state, ["cat"])
    for value, name in ((1, "cl"), (2, "cd")):
        branch = condition_on_outcome(state, "db", value)
        report.conditioned[name] = reduced_density(branch, ["cat"])
        report.fidelities[f"{name}_branch"] = ket_fidelity(
            branch, basis_ket(CAT_LAYOUT, {"cat": value - 1, "db": value})
        )
    return report
