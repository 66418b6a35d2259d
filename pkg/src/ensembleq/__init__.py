"""Quantum measurement as unitary entanglement over labeled registers.

Modules:

* ``hilbert``: labeled tensor-product layouts, kets, density operators.
* ``measurement``: pointer-register premeasurement and the collapse alternative.
* ``scenarios``: Stern-Gerlach, Wigner's friend and cat builders, plus the registry.
* ``wavepacket``: free Gaussian packets on a periodic grid.
* ``ensemble``: seeded Monte Carlo trials, post-selection, mode comparison.
* ``cli``: the ``ensembleq`` command.
"""

__version__ = "0.1.0"

from ensembleq._sampling import BACKEND
from ensembleq.ensemble import compare_modes, exact_distributions, post_select, run_trials
from ensembleq.hilbert import (
    DensityOperator,
    Ket,
    SpaceLayout,
    basis_ket,
    density_from_ket,
    fidelity_with_ket,
    inner,
    partial_trace,
    purity,
    reduced_density,
    schmidt_entanglement,
    superpose,
)
from ensembleq.measurement import (
    MeasurementModel,
    Mode,
    apply_measurement,
    build_pointer_unitary,
    collapse_measurement,
    condition_on_outcome,
    pointer_distribution,
)
from ensembleq.scenarios import SCENARIO_IDS, get_scenario
from ensembleq.wavepacket import GridSpec, PacketParams, gaussian_packet

__all__ = [
    "BACKEND", "DensityOperator", "GridSpec", "Ket", "MeasurementModel", "Mode", "PacketParams",
    "SCENARIO_IDS", "SpaceLayout", "apply_measurement", "basis_ket", "build_pointer_unitary",
    "collapse_measurement", "compare_modes", "condition_on_outcome", "density_from_ket",
    "exact_distributions", "fidelity_with_ket", "gaussian_packet", "get_scenario", "inner",
    "partial_trace", "pointer_distribution", "post_select", "purity", "reduced_density",
    "run_trials", "schmidt_entanglement", "superpose",
]
