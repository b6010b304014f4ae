"""Numerical checks of the analytic gauge-model identities.

:func:`run_suite` evaluates every identity and returns one :class:`Check`
per item; nothing raises on a failed identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.integrate import dblquad, quad

from .gauge import (
    ConstantFlux,
    LensFlux,
    ModelParams,
    connection,
    curvature_fd,
    diabatic_hamiltonian,
    effective_B,
    holonomy_loop,
    induction_closed_form,
    kick_matrix,
    mixing_angle,
    rectangle_loop,
    scalar_potential,
    transform_matrix,
)


@dataclass
class Check:
    name: str
    value: float
    target: str
    passed: bool

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.6g} ({self.target})"


def _le(name, value, limit):
    value = float(value)
    return Check(name, value, f"<= {limit:g}", bool(value <= limit))


def _points(rng, n, xi_span=3.0, eta_span=3.0):
    return rng.uniform(-xi_span, xi_span, n), rng.uniform(-eta_span, eta_span, n)


def isospectrality(params, rng, n=1000):
    x, y = _points(rng, n)
    ev = np.linalg.eigvalsh(diabatic_hamiltonian(x, y, params))
    want = np.array([-params.delta, params.delta])
    return float(np.max(np.abs(ev - want))) / max(params.delta, 1.0)


def kick_unitarity(params, rng, n=100, dtau=1e-4):
    x, y = _points(rng, n)
    u = kick_matrix(x, y, params, dtau)
    eye = np.eye(2)
    return float(np.max(np.abs(np.conj(np.swapaxes(u, -1, -2)) @ u - eye)))


def connection_hermiticity(params, rng, n=1000):
    x, y = _points(rng, n)
    a = connection(x, y, params)
    dev = 0.0
    for m in (a.a_xi, a.a_eta):
        dev = max(dev, float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))))))
    return dev


def curvature_residual(params, rng, h=1e-3, n=200, order=4):
    """(max |F| at h, observed convergence order from h and 2h)."""
    x, y = _points(rng, n, 2.0, 2.0)
    r1 = float(np.max(np.abs(curvature_fd(x, y, params, h, order))))
    r2 = float(np.max(np.abs(curvature_fd(x, y, params, 2 * h, order))))
    return r1, float(np.log2(r2 / r1)) if r1 > 0 else float("inf")


def holonomy_deviation(params, xi_range=(-0.5, 0.5), eta_range=(-0.5, 0.5), n_segments=10_000):
    hol = holonomy_loop(rectangle_loop(xi_range, eta_range, n_segments), params)
    return float(np.linalg.norm(hol - np.eye(2), 2))


def enclosed_flux(params, xi_range, eta_range):
    val, _ = dblquad(lambda y, x: float(effective_B(x, y, params)), xi_range[0], xi_range[1],
                     eta_range[0], eta_range[1], epsabs=1e-12, epsrel=1e-12)
    return val


def projected_holonomy_error(params, xi_range=(-1.0, 1.0), eta_range=(-1.0, 1.0), n_segments=10_000):
    """|arg(hol_22) + Theta| wrapped to (-pi, pi]; Theta is the enclosed flux."""
    hol = holonomy_loop(rectangle_loop(xi_range, eta_range, n_segments), params, projected=True)
    theta = enclosed_flux(params, xi_range, eta_range)
    err = np.angle(hol[1, 1] * np.exp(1j * theta))
    return abs(float(err)), theta


def flux_identity(phi, beta):
    p = ModelParams(0.0, beta, ConstantFlux(phi))
    val, _ = quad(lambda x: float(effective_B(x, 0.0, p)), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13,
                  limit=200)
    return abs(val - phi)


def closed_form_residual(params, rng, n=1000):
    x, y = _points(rng, n)
    gen = effective_B(x, y, params)
    ref = induction_closed_form(x, y, params)
    scale = np.maximum(np.abs(ref), 1e-300)
    mask = np.abs(ref) > 1e-200
    return float(np.max(np.abs(gen - ref)[mask] / scale[mask]))


def transform_roundtrip(params, rng, n=1000):
    x, y = _points(rng, n)
    w = transform_matrix(x, y, params)
    psi = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    out = np.einsum("nij,nj->ni", np.conj(np.swapaxes(w, -1, -2)), np.einsum("nij,nj->ni", w, psi))
    return float(np.max(np.abs(out - psi)))


def scalar_potential_center(params):
    want = (np.pi * params.beta / 4) ** 2 + float(params.flux.phase_slope(0.0)) ** 2 / 4
    return abs(float(scalar_potential(0.0, 0.0, params)) - want)


def run_suite(params: ModelParams, lens: ModelParams = None, seed: int = 20120101) -> List[Check]:
    """All identity checks at ``params`` (a constant-flux model) and ``lens``."""
    rng = np.random.default_rng(seed)
    if lens is None:
        lens = ModelParams(400.0, params.beta, LensFlux(12.0, 3.0, 1.0))
    checks = []
    for tag, p in (("constant", params), ("lens", lens)):
        checks.append(_le(f"[{tag}] isospectrality max |eig - (+-delta)| / delta", isospectrality(p, rng), 1e-12))
        checks.append(_le(f"[{tag}] kick unitarity", kick_unitarity(p, rng), 1e-12))
        checks.append(_le(f"[{tag}] connection hermiticity", connection_hermiticity(p, rng), 1e-12))
        r, order = curvature_residual(p, rng)
        checks.append(_le(f"[{tag}] curvature residual at h=1e-3", r, 1e-6))
        checks.append(Check(f"[{tag}] curvature convergence order", order, ">= 1.9", order >= 1.9))
        checks.append(_le(f"[{tag}] holonomy of unit square, 1e4 segments", holonomy_deviation(p), 1e-6))
        checks.append(_le(f"[{tag}] holonomy of [-1,1]^2, 1e4 segments",
                          holonomy_deviation(p, (-1, 1), (-1, 1)), 1e-6))
        checks.append(_le(f"[{tag}] closed-form induction vs general rule (relative)",
                          closed_form_residual(p, rng), 1e-12))
        checks.append(_le(f"[{tag}] adiabatic transform round trip", transform_roundtrip(p, rng), 1e-12))
        checks.append(_le(f"[{tag}] scalar potential at xi=0", scalar_potential_center(p), 1e-10))
    err, theta = projected_holonomy_error(params)
    checks.append(_le(f"[constant] projected holonomy phase vs -enclosed flux (Theta={theta:.6f})", err, 1e-6))
    phi = params.flux.phi if isinstance(params.flux, ConstantFlux) else 6.0
    for beta in (1.0, 2.0, 4.0):
        checks.append(_le(f"flux identity int B dxi = {phi:g}, beta={beta:g}", flux_identity(phi, beta), 1e-8))
    checks.append(_le("mixing angle at xi=1, beta=2 vs 1.54255",
                      abs(float(mixing_angle(1.0, 2.0)) - 0.25 * np.pi * (1 + np.tanh(2.0))), 1e-14))
    return checks
