"""Periodic grid, Gaussian packets and the symmetric split-operator stepper.

One step is ``K(dtau/2) V(dtau) K(dtau/2)`` where ``K`` multiplies each Fourier
mode by ``exp(-i (kx^2 + ky^2) t)`` and ``V`` is the pointwise 2x2 kick
``exp(-i H_d dtau)``. :func:`propagate` merges the two half kinetic factors
that meet between consecutive steps into one full factor, and only splits
them again when a synchronised snapshot is needed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import GaugeMismatchError, PropagationError
from .gauge import ModelParams, kick_tables

TWO_PI = 2.0 * np.pi
DEFAULT_RANGE = (-TWO_PI, TWO_PI)


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    n_xi: int = 512
    n_eta: int = 512
    xi_range: tuple = DEFAULT_RANGE
    eta_range: tuple = DEFAULT_RANGE

    def __post_init__(self):
        for name in ("n_xi", "n_eta"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 16 or not _is_pow2(int(n)):
                raise ValueError(f"{name} must be a power of two >= 16, got {n}")
        for name in ("xi_range", "eta_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name} must be an increasing interval, got {(lo, hi)}")


@dataclass(frozen=True)
class Grid:
    """Coordinates (right endpoint excluded) and angular wavenumber tables."""

    spec: GridSpec
    xi: np.ndarray
    eta: np.ndarray
    kxi: np.ndarray
    keta: np.ndarray
    h_xi: float
    h_eta: float

    @property
    def shape(self):
        return (self.spec.n_xi, self.spec.n_eta)

    @property
    def cell(self):
        return self.h_xi * self.h_eta

    def mesh(self):
        return np.meshgrid(self.xi, self.eta, indexing="ij")


def build_grid(spec: GridSpec) -> Grid:
    (x0, x1), (y0, y1) = spec.xi_range, spec.eta_range
    hx = (x1 - x0) / spec.n_xi
    hy = (y1 - y0) / spec.n_eta
    xi = x0 + hx * np.arange(spec.n_xi)
    eta = y0 + hy * np.arange(spec.n_eta)
    kxi = TWO_PI * np.fft.fftfreq(spec.n_xi, d=hx)
    keta = TWO_PI * np.fft.fftfreq(spec.n_eta, d=hy)
    return Grid(spec, xi, eta, kxi, keta, hx, hy)


@dataclass
class SpinorField:
    """Two-channel amplitude on the grid. ``gauge`` is "diabatic" or "adiabatic"."""

    f: np.ndarray
    g: np.ndarray
    gauge: str = "diabatic"
    tau: float = 0.0

    def copy(self):
        return dataclasses.replace(self, f=self.f.copy(), g=self.g.copy())

    def total_norm(self, grid: Grid) -> float:
        return float((np.vdot(self.f, self.f).real + np.vdot(self.g, self.g).real) * grid.cell)

    def density(self):
        return np.abs(self.f) ** 2 + np.abs(self.g) ** 2


@dataclass(frozen=True)
class PacketSpec:
    """Gaussian packet; ``widths`` are rms widths of the density.

    With ``slab_width`` set, the eta profile becomes a smoothed top hat of that
    full width whose edges fall off over ``widths[1]``.
    """

    center: tuple = (-4.0, 0.0)
    widths: tuple = (0.5, 0.5)
    carrier: tuple = (12.0, 0.0)
    channel: str = "g"
    phase: float = 0.0
    slab_width: Optional[float] = None

    def __post_init__(self):
        if min(self.widths) <= 0:
            raise ValueError("packet widths must be positive")
        if self.channel not in ("f", "g"):
            raise ValueError(f"channel must be 'f' or 'g', got {self.channel!r}")
        if self.slab_width is not None and self.slab_width <= 0:
            raise ValueError("slab_width must be positive")


def packet_amplitude(grid: Grid, spec: PacketSpec) -> np.ndarray:
    """Unnormalised complex amplitude of one packet on the grid."""
    x, y = grid.xi[:, None], grid.eta[None, :]
    (x0, y0), (sx, sy), (kx, ky) = spec.center, spec.widths, spec.carrier
    env_x = np.exp(-((x - x0) ** 2) / (4 * sx * sx))
    if spec.slab_width is None:
        env_y = np.exp(-((y - y0) ** 2) / (4 * sy * sy))
    else:
        half = 0.5 * spec.slab_width
        env_y = 0.5 * (np.tanh((y - y0 + half) / sy) - np.tanh((y - y0 - half) / sy))
    carrier = np.exp(1j * (kx * (x - x0) + ky * (y - y0) + spec.phase))
    return env_x * env_y * carrier


def boundary_ratio(amp: np.ndarray) -> float:
    """Largest edge-cell density relative to the peak density."""
    p = np.abs(amp) ** 2
    edge = max(p[0].max(), p[-1].max(), p[:, 0].max(), p[:, -1].max())
    return float(edge / p.max())


def make_packet(grid: Grid, spec: PacketSpec, tail_tol: float = 1e-4) -> SpinorField:
    """Normalised packet in ``spec.channel``; the other channel is zero.

    Raises ``ValueError`` when the density at the domain edge exceeds
    ``tail_tol`` times its peak.
    """
    return make_packets(grid, [spec], tail_tol)


def make_packets(grid: Grid, specs, tail_tol: float = 1e-4) -> SpinorField:
    """Coherent superposition of packets, normalised jointly."""
    f = np.zeros(grid.shape, dtype=complex)
    g = np.zeros(grid.shape, dtype=complex)
    for spec in specs:
        amp = packet_amplitude(grid, spec)
        ratio = boundary_ratio(amp)
        if ratio > tail_tol:
            raise ValueError(
                f"packet at {spec.center} reaches the domain edge: edge/peak density "
                f"{ratio:.2e} > {tail_tol:.0e}"
            )
        if spec.channel == "f":
            f += amp
        else:
            g += amp
    out = SpinorField(f, g)
    norm = out.total_norm(grid)
    if norm == 0:
        raise ValueError("packets cancel: zero norm")
    scale = 1.0 / np.sqrt(norm)
    out.f *= scale
    out.g *= scale
    return out


@dataclass(frozen=True)
class RunConfig:
    dtau: float = 1e-4
    n_steps: int = 0
    snapshot_stride: int = 10
    absorber: bool = False
    absorber_width: float = 0.5
    absorber_power: float = 0.125
    fft_workers: int = 1

    def __post_init__(self):
        if not self.dtau > 0:
            raise ValueError("dtau must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.absorber and not self.absorber_width > 0:
            raise ValueError("absorber_width must be positive")


def absorber_profile(coord: np.ndarray, lo: float, hi: float, width: float, power: float):
    """1 in the interior, cos(pi/2 * depth/width)**power inside the edge margin."""
    d = np.minimum(coord - lo, hi - coord)
    depth = np.clip((width - d) / width, 0.0, 1.0)
    return np.cos(0.5 * np.pi * depth) ** power


def kinetic_factors(grid: Grid, t: float):
    """Separable factors of exp(-i k^2 t)."""
    return np.exp(-1j * grid.kxi**2 * t), np.exp(-1j * grid.keta**2 * t)


class SplitStepper:
    """Precomputed tables for stepping one grid/model/dtau combination."""

    def __init__(self, grid: Grid, params: ModelParams, dtau: float, workers: int = 1,
                 absorber: Optional[tuple] = None):
        self.grid = grid
        self.params = params
        self.dtau = dtau
        self.workers = workers
        self.diag, self.coup, self.phase = kick_tables(grid.xi, grid.eta, params, dtau)
        self.half = kinetic_factors(grid, 0.5 * dtau)
        self.full = kinetic_factors(grid, dtau)
        self.mask = None
        if absorber is not None:
            width, power = absorber
            (x0, x1), (y0, y1) = grid.spec.xi_range, grid.spec.eta_range
            self.mask = (
                np.ascontiguousarray(absorber_profile(grid.xi, x0, x1, width, power)),
                np.ascontiguousarray(absorber_profile(grid.eta, y0, y1, width, power)),
            )

    def kinetic(self, psi: np.ndarray, factors) -> np.ndarray:
        spec = sfft.fft2(psi, overwrite_x=True, workers=self.workers)
        kernels.separable_scale(spec, factors[0], factors[1])
        return sfft.ifft2(spec, overwrite_x=True, workers=self.workers)

    def kick(self, f, g):
        kernels.kick(f, g, self.diag, self.coup, self.phase)

    def absorb(self, f, g):
        if self.mask is not None:
            kernels.separable_scale(f, *self.mask)
            kernels.separable_scale(g, *self.mask)

    def step(self, f, g):
        f = self.kinetic(f, self.half)
        g = self.kinetic(g, self.half)
        self.kick(f, g)
        f = self.kinetic(f, self.half)
        g = self.kinetic(g, self.half)
        return f, g


def _require_diabatic(field: SpinorField):
    if field.gauge != "diabatic":
        raise GaugeMismatchError("propagation runs in the diabatic gauge only")


def step(field: SpinorField, grid: Grid, params: ModelParams, dtau: float) -> SpinorField:
    """One unfused Strang step; returns a new field."""
    _require_diabatic(field)
    st = SplitStepper(grid, params, dtau)
    f, g = st.step(field.f.astype(complex, copy=True), field.g.astype(complex, copy=True))
    return SpinorField(f, g, "diabatic", field.tau + dtau)


Observer = Callable[[SpinorField, int], object]


def _readonly(field: SpinorField) -> SpinorField:
    field.f.flags.writeable = False
    field.g.flags.writeable = False
    return field


def propagate(field: SpinorField, grid: Grid, params: ModelParams, run: RunConfig,
              observer: Optional[Observer] = None):
    """Advance ``run.n_steps`` steps.

    ``observer(snapshot, step_index)`` is called for the initial field and then
    every ``snapshot_stride`` steps and after the final step; non-None return
    values are collected. Returns ``(final_field, records)``.
    """
    _require_diabatic(field)
    records = []

    def emit(fld, i):
        if observer is not None:
            r = observer(_readonly(fld), i)
            if r is not None:
                records.append(r)

    emit(field.copy(), 0)
    if run.n_steps == 0:
        return field.copy(), records

    absorber = (run.absorber_width, run.absorber_power) if run.absorber else None
    st = SplitStepper(grid, params, run.dtau, run.fft_workers, absorber)
    tau0 = field.tau
    f = field.f.astype(complex, copy=True)
    g = field.g.astype(complex, copy=True)
    # the state between loop iterations is "half a kinetic step ahead"
    f = st.kinetic(f, st.half)
    g = st.kinetic(g, st.half)
    for i in range(1, run.n_steps + 1):
        st.kick(f, g)
        sync = absorber is not None or i == run.n_steps or i % run.snapshot_stride == 0
        if not sync:
            f = st.kinetic(f, st.full)
            g = st.kinetic(g, st.full)
            continue
        f = st.kinetic(f, st.half)
        g = st.kinetic(g, st.half)
        st.absorb(f, g)
        if i % run.snapshot_stride == 0 or i == run.n_steps:
            if not (np.isfinite(f).all() and np.isfinite(g).all()):
                raise PropagationError(
                    f"non-finite amplitude at step {i} (tau = {tau0 + i * run.dtau:.6g}); "
                    f"dtau = {run.dtau} may be too large for this grid"
                )
            emit(SpinorField(f.copy(), g.copy(), "diabatic", tau0 + i * run.dtau), i)
        if i < run.n_steps:
            f = st.kinetic(f, st.half)
            g = st.kinetic(g, st.half)
    return SpinorField(f, g, "diabatic", tau0 + run.n_steps * run.dtau), records


def spectral_centroid(psi: np.ndarray, grid: Grid):
    """Mean angular wavenumber (k_xi, k_eta) of one channel."""
    p = np.abs(np.fft.fft2(psi)) ** 2
    tot = p.sum()
    return float(p.sum(axis=1) @ grid.kxi / tot), float(p.sum(axis=0) @ grid.keta / tot)
