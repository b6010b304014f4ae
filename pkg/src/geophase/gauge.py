"""Closed-form physics of the two-level gauge model.

The diabatic Hamiltonian is ``H_d = U (delta sigma_3) U^dagger`` with

    U = exp(-i sigma_3 chi/2) exp(-i sigma_2 Omega(xi)) exp(i sigma_3 chi/2),

``Omega(xi) = (pi/4)(1 + tanh(beta xi))`` and ``chi(eta) = eta * Phi(eta)``.
The flux profile ``Phi`` is either a constant or the lens profile
``eta k / sqrt(eta^2 + 4 gamma f^2)``.

Units are the dimensionless ones of the propagator,
``i d psi/d tau = (-laplacian + H_d) psi``.

All functions broadcast over numpy arrays of coordinates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy.special import expit

from .errors import GaugeMismatchError, TotalDeflectionError

if TYPE_CHECKING:
    from .spectral import Grid, SpinorField

TO_ADIABATIC = "to_adiabatic"
TO_DIABATIC = "to_diabatic"


@dataclass(frozen=True)
class ConstantFlux:
    """Flux parameter independent of eta."""

    phi: float

    def value(self, eta):
        return np.full_like(np.asarray(eta, dtype=float), self.phi)

    def phase(self, eta):
        """Coupling phase chi(eta) = phi * eta."""
        return self.phi * np.asarray(eta, dtype=float)

    def phase_slope(self, eta):
        """d chi / d eta."""
        return self.value(eta)

    def scaled(self, factor: float) -> "ConstantFlux":
        return ConstantFlux(self.phi * factor)


@dataclass(frozen=True)
class LensFlux:
    """Lens profile Phi(eta) = eta k / sqrt(eta^2 + 4 gamma f^2).

    ``k`` is the flux amplitude; it is set to the carrier wavenumber of the
    incident packet so that |Phi| < k everywhere.
    """

    k: float
    f_lens: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.k <= 0 or self.f_lens <= 0 or self.gamma <= 0:
            raise ValueError("lens needs k > 0, f_lens > 0 and gamma > 0")

    @property
    def _c(self):
        return 4.0 * self.gamma * self.f_lens**2

    def value(self, eta):
        eta = np.asarray(eta, dtype=float)
        return eta * self.k / np.sqrt(eta * eta + self._c)

    def phase(self, eta):
        eta = np.asarray(eta, dtype=float)
        return eta * self.value(eta)

    def phase_slope(self, eta):
        # d/d eta [eta^2 k (eta^2 + c)^(-1/2)] = k eta (eta^2 + 2c) / (eta^2 + c)^(3/2)
        eta = np.asarray(eta, dtype=float)
        c = self._c
        return self.k * eta * (eta * eta + 2.0 * c) / (eta * eta + c) ** 1.5

    def scaled(self, factor: float) -> "LensFlux":
        return dataclasses.replace(self, k=self.k * factor)


FluxProfile = Union[ConstantFlux, LensFlux]


@dataclass(frozen=True)
class ModelParams:
    """Gap ``delta``, wall steepness ``beta`` and flux profile.

    ``delta = 0`` is accepted: the kick is then the identity, which is what the
    free-particle checks use.
    """

    delta: float
    beta: float
    flux: FluxProfile

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass
class ConnectionSample:
    """Gauge potential components at ``point``; matrices have shape (..., 2, 2)."""

    a_xi: np.ndarray
    a_eta: np.ndarray
    point: tuple


# ---------------------------------------------------------------------------
# mixing angle and its trigonometric functions

def mixing_angle(xi, beta):
    """(pi/4)(1 + tanh(beta xi)), evaluated without cancellation for xi << 0."""
    return 0.5 * np.pi * expit(2.0 * beta * np.asarray(xi, dtype=float))


def mixing_angle_slope(xi, beta):
    """d Omega / d xi = (pi/4) beta sech^2(beta xi)."""
    x = 2.0 * beta * np.asarray(xi, dtype=float)
    return np.pi * beta * expit(x) * expit(-x)


def _sin2(xi, beta):
    # sin(2 Omega) = cos(pi/2 tanh(beta xi)); this form keeps full relative
    # precision in the tails
    return np.cos(0.5 * np.pi * np.tanh(beta * np.asarray(xi, dtype=float)))


def _cos2(xi, beta):
    return -np.sin(0.5 * np.pi * np.tanh(beta * np.asarray(xi, dtype=float)))


# ---------------------------------------------------------------------------
# potential matrix and one-step kick

def diabatic_potential(xi, eta, params: ModelParams):
    """Return ``(V, V12)`` with V = delta cos 2 Omega, V12 = exp(-i chi) delta sin 2 Omega."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    v = params.delta * _cos2(xi, params.beta)
    v12 = np.exp(-1j * params.flux.phase(eta)) * params.delta * _sin2(xi, params.beta)
    return v, v12


def diabatic_hamiltonian(xi, eta, params: ModelParams):
    """The 2x2 matrix [[V, V12], [V12*, -V]], shape (..., 2, 2)."""
    v, v12 = diabatic_potential(xi, eta, params)
    h = np.empty(v.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = v
    h[..., 0, 1] = v12
    h[..., 1, 0] = np.conj(v12)
    h[..., 1, 1] = -v
    return h


def kick_matrix(xi, eta, params: ModelParams, dtau: float):
    """exp(-i H_d dtau) in closed form.

    Because H_d^2 = delta^2, the exponential is
    ``cos(delta dtau) - i sin(delta dtau) H_d / delta``.
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    cd = np.cos(params.delta * dtau)
    sd = np.sin(params.delta * dtau)
    c2 = _cos2(xi, params.beta)
    off = -1j * np.exp(-1j * params.flux.phase(eta)) * _sin2(xi, params.beta) * sd
    u = np.empty(xi.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = cd - 1j * c2 * sd
    u[..., 0, 1] = off
    u[..., 1, 0] = -np.conj(off)
    u[..., 1, 1] = cd + 1j * c2 * sd
    return u


def kick_tables(xi, eta, params: ModelParams, dtau: float):
    """Separable factors of the kick on a tensor grid.

    Returns ``(diag, coup, phase)`` such that the kick matrix at ``(xi[i], eta[j])``
    is ``[[diag_i, b_ij], [-conj(b_ij), conj(diag_i)]]`` with
    ``b_ij = -1j * coup_i * phase_j``.
    """
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    cd = np.cos(params.delta * dtau)
    sd = np.sin(params.delta * dtau)
    diag = (cd - 1j * _cos2(xi, params.beta) * sd).astype(complex)
    coup = np.ascontiguousarray(_sin2(xi, params.beta) * sd)
    phase = np.ascontiguousarray(np.exp(-1j * params.flux.phase(eta)))
    return np.ascontiguousarray(diag), coup, phase


# ---------------------------------------------------------------------------
# diabatic <-> adiabatic

def transform_matrix(xi, eta, params: ModelParams):
    """W with psi_adiabatic = W psi_diabatic; W = U^dagger."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    om = mixing_angle(xi, params.beta)
    c, s = np.cos(om), np.sin(om)
    e = np.exp(-1j * params.flux.phase(eta))
    w = np.empty(xi.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = c
    w[..., 0, 1] = e * s
    w[..., 1, 0] = -np.conj(e) * s
    w[..., 1, 1] = c
    return w


def adiabatic_transform(field: "SpinorField", grid: "Grid", params: ModelParams, direction: str):
    """Pointwise rotation between the diabatic and adiabatic amplitudes.

    ``to_adiabatic``::

        f~ = f cos Omega + exp(-i chi) sin Omega g
        g~ = g cos Omega - exp(+i chi) sin Omega f

    ``to_diabatic`` applies the inverse. The returned field carries the
    flipped gauge tag.
    """
    if direction == TO_ADIABATIC:
        want, out = "diabatic", "adiabatic"
    elif direction == TO_DIABATIC:
        want, out = "adiabatic", "diabatic"
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if field.gauge != want:
        raise GaugeMismatchError(f"{direction} needs a {want} field, got {field.gauge}")

    om = mixing_angle(grid.xi, params.beta)[:, None]
    c, s = np.cos(om), np.sin(om)
    e = np.exp(-1j * params.flux.phase(grid.eta))[None, :]
    f, g = field.f, field.g
    if direction == TO_ADIABATIC:
        nf = c * f + e * s * g
        ng = c * g - np.conj(e) * s * f
    else:
        nf = c * f - e * s * g
        ng = np.conj(e) * s * f + c * g
    return dataclasses.replace(field, f=nf, g=ng, gauge=out)


# ---------------------------------------------------------------------------
# gauge potential

def connection(xi, eta, params: ModelParams) -> ConnectionSample:
    """Non-Abelian potential A_mu = i W d_mu W^dagger from closed-form derivatives.

    With c = cos Omega, s = sin Omega, e = exp(-i chi) and D = d chi/d eta::

        A_xi  = Omega' [[0, -i e], [i e*, 0]]
        A_eta = -D s [[s, c e], [c e*, -s]]
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    om = mixing_angle(xi, params.beta)
    dom = mixing_angle_slope(xi, params.beta)
    c, s = np.cos(om), np.sin(om)
    e = np.exp(-1j * params.flux.phase(eta))
    d = params.flux.phase_slope(eta)

    a_xi = np.zeros(xi.shape + (2, 2), dtype=complex)
    a_xi[..., 0, 1] = -1j * dom * e
    a_xi[..., 1, 0] = 1j * dom * np.conj(e)

    a_eta = np.empty(xi.shape + (2, 2), dtype=complex)
    a_eta[..., 0, 0] = -d * s * s
    a_eta[..., 0, 1] = -d * s * c * e
    a_eta[..., 1, 0] = -d * s * c * np.conj(e)
    a_eta[..., 1, 1] = d * s * s
    return ConnectionSample(a_xi=a_xi, a_eta=a_eta, point=(xi, eta))


_STENCILS = {
    2: ((1, 0.5),),
    4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0)),
}


def _central_diff(fun, u, h, order):
    acc = 0.0
    for m, w in _STENCILS[order]:
        acc = acc + w * (fun(u + m * h) - fun(u - m * h))
    return acc / h


def curvature_fd(xi, eta, params: ModelParams, h: float, order: int = 4):
    """F = d_xi A_eta - d_eta A_xi - i [A_xi, A_eta] by central differences.

    ``order`` selects the 3-point (2) or 5-point (4) stencil.
    """
    if order not in _STENCILS:
        raise ValueError(f"order must be one of {sorted(_STENCILS)}")
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    d_xi_a_eta = _central_diff(lambda u: connection(u, eta, params).a_eta, xi, h, order)
    d_eta_a_xi = _central_diff(lambda u: connection(xi, u, params).a_xi, eta, h, order)
    a = connection(xi, eta, params)
    comm = a.a_xi @ a.a_eta - a.a_eta @ a.a_xi
    return d_xi_a_eta - d_eta_a_xi - 1j * comm


def _expm_minus_i_herm(m):
    """exp(-i M) for Hermitian 2x2 M (stacked), via M = a0 + a.sigma."""
    a0 = 0.5 * (m[..., 0, 0] + m[..., 1, 1]).real
    az = 0.5 * (m[..., 0, 0] - m[..., 1, 1]).real
    ax = m[..., 1, 0].real
    ay = m[..., 1, 0].imag
    r = np.sqrt(ax * ax + ay * ay + az * az)
    cr = np.cos(r)
    # sin(r)/r, finite at r = 0
    sr = np.sinc(r / np.pi)
    out = np.empty(m.shape, dtype=complex)
    out[..., 0, 0] = cr - 1j * sr * az
    out[..., 1, 1] = cr + 1j * sr * az
    out[..., 0, 1] = -1j * sr * (ax - 1j * ay)
    out[..., 1, 0] = -1j * sr * (ax + 1j * ay)
    return out * np.exp(-1j * a0)[..., None, None]


def segment_factors(path, params: ModelParams, projected: bool = False):
    """exp(-i A(mid) . dr) for each segment of a polyline, shape (n_seg, 2, 2).

    With ``projected`` only the (2,2) entry of A, the potential seen by the
    lower adiabatic channel, is kept.
    """
    path = np.asarray(path, dtype=float)
    mid = 0.5 * (path[1:] + path[:-1])
    dr = np.diff(path, axis=0)
    a = connection(mid[:, 0], mid[:, 1], params)
    gen = a.a_xi * dr[:, 0, None, None] + a.a_eta * dr[:, 1, None, None]
    if projected:
        keep = np.zeros_like(gen)
        keep[:, 1, 1] = gen[:, 1, 1]
        gen = keep
    return _expm_minus_i_herm(gen)


def transport(path, params: ModelParams, projected: bool = False):
    """Ordered exponential of -i A along an open or closed polyline.

    Later segments multiply from the right, which is the ordering for which
    the product from r0 to r1 equals W(r0) W(r1)^dagger.
    """
    out = np.eye(2, dtype=complex)
    for m in segment_factors(path, params, projected):
        out = out @ m
    return out


def holonomy_loop(loop, params: ModelParams, projected: bool = False):
    """Holonomy of a closed polyline (first point == last point, >= 3 segments)."""
    loop = np.asarray(loop, dtype=float)
    if loop.ndim != 2 or loop.shape[1] != 2:
        raise ValueError("loop must be an (n, 2) array of (xi, eta) points")
    if loop.shape[0] < 4:
        raise ValueError("loop needs at least 3 segments")
    if not np.array_equal(loop[0], loop[-1]):
        raise ValueError("loop is not closed: first and last points differ")
    return transport(loop, params, projected)


def rectangle_loop(xi_range, eta_range, n_segments: int):
    """Counter-clockwise rectangle split into ``n_segments`` (a multiple of 4)."""
    if n_segments % 4:
        raise ValueError("n_segments must be a multiple of 4")
    m = n_segments // 4
    (x0, x1), (y0, y1) = xi_range, eta_range
    t = np.linspace(0.0, 1.0, m + 1)[:-1]
    sides = [
        np.column_stack([x0 + (x1 - x0) * t, np.full(m, y0)]),
        np.column_stack([np.full(m, x1), y0 + (y1 - y0) * t]),
        np.column_stack([x1 - (x1 - x0) * t, np.full(m, y1)]),
        np.column_stack([np.full(m, x0), y1 - (y1 - y0) * t]),
    ]
    pts = np.vstack(sides + [[[x0, y0]]])
    return pts


# ---------------------------------------------------------------------------
# effective single-channel fields

def projected_potential(xi, eta, params: ModelParams):
    """eta component of the projected potential P A P: D(eta) sin^2 Omega(xi)."""
    s = np.sin(mixing_angle(xi, params.beta))
    return params.flux.phase_slope(eta) * s * s


def effective_B(xi, eta, params: ModelParams):
    """Synthetic induction B = d_xi [D(eta) sin^2 Omega] = D sin(2 Omega) Omega'."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    return (
        params.flux.phase_slope(eta)
        * _sin2(xi, params.beta)
        * mixing_angle_slope(xi, params.beta)
    )


def induction_closed_form(xi, eta, params: ModelParams):
    """The printed induction formulas, kept separate from :func:`effective_B`.

    Constant flux: (pi/4) beta Phi sech^2(beta xi) cos(pi/2 tanh(beta xi)).
    Lens: pi beta k eta (8 f^2 + eta^2) sech^2 cos(...) / (4 (4 f^2 + eta^2)^(3/2)),
    written here for gamma = 1 as printed; general gamma replaces f^2 by gamma f^2.
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    b = params.beta
    sech2 = 1.0 / np.cosh(b * xi) ** 2
    cosf = np.cos(0.5 * np.pi * np.tanh(b * xi))
    fl = params.flux
    if isinstance(fl, ConstantFlux):
        return 0.25 * np.pi * b * fl.phi * sech2 * cosf
    gf2 = fl.gamma * fl.f_lens**2
    return (
        np.pi * b * fl.k * eta * (8 * gf2 + eta**2) * sech2 * cosf
        / (4 * (4 * gf2 + eta**2) ** 1.5)
    )


def scalar_potential(xi, eta, params: ModelParams):
    """Born-Oppenheimer scalar term b = |(A_xi)_12|^2 + |(A_eta)_12|^2.

    In closed form ``Omega'^2 + D^2 sin^2(2 Omega) / 4``.
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
    a = connection(xi, eta, params)
    return np.abs(a.a_xi[..., 0, 1]) ** 2 + np.abs(a.a_eta[..., 0, 1]) ** 2


def analytic_deflection(k: float, phi: float) -> float:
    """tan(theta) = |phi| / sqrt(k^2 - phi^2) for a slab of total flux ``phi``."""
    if abs(phi) >= k:
        raise TotalDeflectionError(
            f"|phi| = {abs(phi)} >= k = {k}: no transmitted straight-line asymptote"
        )
    return abs(phi) / np.sqrt(k * k - phi * phi)


def lens_flux(eta, lens: LensFlux):
    return lens.value(eta)
