"""Free-particle wavefunctions on a periodic 1-D grid.

Fourier convention (unitary, ``e^{-ikx}`` forward kernel)::

    f(k) = (2 pi)^{-1/2} * integral psi(x) e^{-ikx} dx

discretized as ``f_j = dx / sqrt(2 pi) * e^{-i k_j x_min} * FFT(psi)_j`` with
``k_j = 2 pi * fftfreq(n, dx)`` sorted ascending. With this normalization
``sum |f|^2 dk == sum |psi|^2 dx``. Defaults use natural units
(``hbar = m = 1``); every physical parameter can be passed explicitly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

# Boundary amplitude allowed relative to the packet peak.
EDGE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 64 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 64, got {n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return np.fft.fftshift(2 * np.pi * np.fft.fftfreq(self.n_points, self.dx))

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.length

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.dx

    def check_width(self, std: float, center: float = 0.0) -> None:
        """Reject a Gaussian of position spread ``std`` whose tails reach the edges."""
        margin = min(center - self.x_min, self.x_max - center)
        edge = np.exp(-margin ** 2 / (4 * std ** 2)) if margin > 0 else 1.0
        if edge >= EDGE_TOLERANCE:
            raise ValueError(
                f"grid [{self.x_min}, {self.x_max}] too narrow for a packet of width {std:.4g} "
                f"centred at {center:.4g} (edge amplitude {edge:.2g} of peak)"
            )


@dataclass(frozen=True)
class PacketParams:
    sigma0: float
    mass: float = 1.0
    hbar: float = 1.0
    p0: float = 0.0

    def __post_init__(self):
        for name in ("sigma0", "mass", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def tau0(self) -> float:
        """Spreading time ``2 m sigma0^2 / hbar``."""
        return 2 * self.mass * self.sigma0 ** 2 / self.hbar

    def width(self, t: float) -> float:
        """Position standard deviation at time ``t``."""
        return self.sigma0 * np.sqrt(1 + (t / self.tau0) ** 2)

    @property
    def velocity_std(self) -> float:
        """Born-rule velocity spread ``hbar / (2 m sigma0)``."""
        return self.hbar / (2 * self.mass * self.sigma0)

    @property
    def velocity_std_as_printed(self) -> float:
        """``hbar / (m sigma0)``, the value quoted alongside the Fourier decomposition."""
        return self.hbar / (self.mass * self.sigma0)


@dataclass(frozen=True, eq=False)
class WaveGrid:
    grid: GridSpec
    amplitudes: np.ndarray = field(repr=False)
    hbar: float = 1.0
    mass: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_points,):
            raise ValueError("amplitude count does not match the grid")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(self.density.sum() * self.grid.dx)


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    grid: GridSpec
    amplitudes: np.ndarray = field(repr=False)
    hbar: float = 1.0
    mass: float = 1.0
    t: float = 0.0

    @property
    def k(self) -> np.ndarray:
        return self.grid.k

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(self.density.sum() * self.grid.dk)


def plane_wave(p: float, grid: GridSpec, hbar: float = 1.0, mass: float = 1.0) -> WaveGrid:
    """``e^{ipx/hbar}`` sampled on the grid, normalized over the box."""
    k = p / hbar
    if abs(k) >= grid.k_nyquist:
        raise ValueError(f"wave number {k:.4g} aliases on this grid (Nyquist {grid.k_nyquist:.4g})")
    amps = np.exp(1j * k * grid.x) / np.sqrt(grid.length)
    return WaveGrid(grid, amps, hbar, mass)


def gaussian_packet(params: PacketParams, t: float, grid: GridSpec) -> WaveGrid:
    """Closed-form free Gaussian at time ``t``.

    ``sqrt(sigma0) / ((2 pi)^{1/4} s) * exp(-(x - v0 t)^2 / (4 s^2))`` with complex
    width ``s = sigma0 * sqrt(1 + i t / tau0)``, times the carrier
    ``exp(i k0 (x - v0 t / 2))`` when ``p0 != 0``.
    """
    k0 = params.p0 / params.hbar
    v0 = params.p0 / params.mass
    center = v0 * t
    grid.check_width(params.width(t), center)
    if abs(k0) >= grid.k_nyquist:
        raise ValueError("carrier momentum aliases on this grid")
    s = params.sigma0 * np.sqrt(1 + 1j * t / params.tau0)
    x = grid.x
    amps = (
        np.sqrt(params.sigma0) / ((2 * np.pi) ** 0.25 * s)
        * np.exp(-((x - center) ** 2) / (4 * s ** 2))
        * np.exp(1j * k0 * (x - center / 2))
    )
    return WaveGrid(grid, amps, params.hbar, params.mass, t)


def fourier_decompose(w: WaveGrid) -> SpectrumGrid:
    g = w.grid
    k = 2 * np.pi * np.fft.fftfreq(g.n_points, g.dx)
    f = g.dx / np.sqrt(2 * np.pi) * np.exp(-1j * k * g.x_min) * np.fft.fft(w.amplitudes)
    return SpectrumGrid(g, np.fft.fftshift(f), w.hbar, w.mass, w.t)


def synthesize(s: SpectrumGrid) -> WaveGrid:
    """Inverse of ``fourier_decompose``."""
    g = s.grid
    f = np.fft.ifftshift(s.amplitudes)
    k = 2 * np.pi * np.fft.fftfreq(g.n_points, g.dx)
    amps = np.fft.ifft(f * np.exp(1j * k * g.x_min)) * np.sqrt(2 * np.pi) / g.dx
    return WaveGrid(g, amps, s.hbar, s.mass, s.t)


def evolve_free(w: WaveGrid, dt: float) -> WaveGrid:
    """Exact free evolution: each mode picks up ``exp(-i hbar k^2 dt / 2m)``."""
    s = fourier_decompose(w)
    phase = np.exp(-1j * w.hbar * s.k ** 2 * dt / (2 * w.mass))
    evolved = SpectrumGrid(s.grid, s.amplitudes * phase, w.hbar, w.mass, w.t + dt)
    return synthesize(evolved)


def grid_fidelity(a: WaveGrid, b: WaveGrid) -> float:
    """``|<a|b>|^2`` by grid quadrature."""
    overlap = np.vdot(a.amplitudes, b.amplitudes) * a.grid.dx
    return float(abs(overlap) ** 2)


def _moments(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    total = weights.sum()
    mean = float((values * weights).sum() / total)
    var = float(((values - mean) ** 2 * weights).sum() / total)
    return mean, float(np.sqrt(var))


def position_stats(w: WaveGrid) -> tuple[float, float, float]:
    """``(mean, std, norm)`` of ``|psi|^2 dx``."""
    mean, std = _moments(w.grid.x, w.density)
    return mean, std, w.norm


def velocity_stats(s: SpectrumGrid, mass: float | None = None) -> tuple[float, float]:
    """``(mean, std)`` of ``v = hbar k / m`` under the Born weight ``|f(k)|^2 dk``."""
    m = s.mass if mass is None else mass
    return _moments(s.hbar * s.k / m, s.density)


def sample_position(w: WaveGrid, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` positions from ``|psi|^2 dx`` by inverse CDF over grid points.

    Uses ``numpy.random.default_rng(seed)`` (PCG64).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    weights = w.density
    cdf = np.cumsum(weights / weights.sum())
    last = int(np.flatnonzero(weights)[-1])
    cdf[last:] = 1.0
    u = np.random.default_rng(seed).random(n)
    return w.grid.x[np.searchsorted(cdf, u, side="right")]


CSV_COLUMNS = ("re", "im", "abs2")


def to_csv(data: WaveGrid | SpectrumGrid) -> str:
    """Curve as CSV text, columns ``x|k, re, im, abs2``."""
    axis, coords = ("x", data.grid.x) if isinstance(data, WaveGrid) else ("k", data.k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((axis,) + CSV_COLUMNS)
    for c, z in zip(coords, data.amplitudes):
        writer.writerow((repr(float(c)), repr(float(z.real)), repr(float(z.imag)), repr(float(abs(z) ** 2))))
    return buf.getvalue()


def read_csv(text: str) -> tuple[str, np.ndarray, np.ndarray]:
    """Parse ``to_csv`` output back into ``(axis name, coordinates, complex amplitudes)``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if tuple(header[1:]) != CSV_COLUMNS or header[0] not in ("x", "k"):
        raise ValueError(f"unexpected CSV header {header}")
    return header[0], body[:, 0], body[:, 1] + 1j * body[:, 2]


def default_grid(params: PacketParams, t_max: float, n_points: int | None = None) -> GridSpec:
    """Symmetric grid wide enough for the packet up to ``t_max``.

    Half-width is 12 widths plus the drift, which puts the edge amplitude
    near ``exp(-36)``. Without an explicit ``n_points``, the point count starts
    at 2048 and doubles until the spectrum is resolved to 10/sigma0 past the
    carrier.
    """
    half = 12 * params.width(t_max) + abs(params.p0 / params.mass) * t_max
    if n_points is None:
        n_points = 2048
        k_need = abs(params.p0 / params.hbar) + 10 / params.sigma0
        while np.pi * n_points / (2 * half) < k_need:
            n_points *= 2
    return GridSpec(-float(half), float(half), n_points)
