"""Classical charged-particle paths in the synthetic induction.

Equations of motion in the propagator's units (group velocity 2k)::

    dr/dtau = v
    dv/dtau = 2 v x (B z_hat)  =  2 B (v_eta, -v_xi)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import PropagationError
from .gauge import LensFlux, ModelParams, effective_B

PATH_HEADER = ("tau", "xi", "eta", "vxi", "veta")


@dataclass(frozen=True)
class ClassicalState:
    position: tuple
    velocity: tuple
    tau: float = 0.0

    def as_array(self):
        return np.array([*self.position, *self.velocity], dtype=float)


def scalar_induction(params: ModelParams):
    """Scalar ``B(xi, eta)`` equal to :func:`effective_B`, without array overhead."""
    beta = params.beta
    fl = params.flux
    if isinstance(fl, LensFlux):
        c, amp = 4.0 * fl.gamma * fl.f_lens**2, fl.k

        def slope(eta):
            e2 = eta * eta
            return amp * eta * (e2 + 2.0 * c) / (e2 + c) ** 1.5
    else:
        phi = float(fl.phi)

        def slope(eta):
            return phi

    def b(xi, eta):
        u = beta * xi
        if abs(u) > 350.0:
            return 0.0
        sech2 = 1.0 / math.cosh(u) ** 2
        return slope(eta) * math.cos(0.5 * math.pi * math.tanh(u)) * 0.25 * math.pi * beta * sech2

    return b


def lorentz_rhs(y: np.ndarray, params: ModelParams, field=None) -> np.ndarray:
    """Time derivative of the packed state ``[xi, eta, v_xi, v_eta]``.

    ``field`` overrides the induction with any callable ``B(xi, eta)``.
    """
    xi, eta, vx, vy = y
    b = effective_B(xi, eta, params) if field is None else field(xi, eta)
    return np.array([vx, vy, 2.0 * b * vy, -2.0 * b * vx])


def _rhs(field):
    def f(xi, eta, vx, vy):
        b = 2.0 * field(xi, eta)
        return vx, vy, b * vy, -b * vx

    return f


def integrate_rk4(initial: ClassicalState, params: ModelParams, dtau: float = 1e-5,
                  n_steps: int = 0, stride: int = 1, field=None, until=None):
    """Classical RK4; returns an (n_samples, 5) array of (tau, xi, eta, v_xi, v_eta).

    ``field`` overrides the induction with any scalar callable ``B(xi, eta)``.
    ``until(xi, eta)`` stops the integration (after recording the step) once true.
    """
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    rhs = _rhs(scalar_induction(params) if field is None else field)
    x, y, vx, vy = (float(v) for v in initial.as_array())
    out = [(initial.tau, x, y, vx, vy)]
    h2, h6 = 0.5 * dtau, dtau / 6.0
    for i in range(1, n_steps + 1):
        a1, b1, c1, d1 = rhs(x, y, vx, vy)
        a2, b2, c2, d2 = rhs(x + h2 * a1, y + h2 * b1, vx + h2 * c1, vy + h2 * d1)
        a3, b3, c3, d3 = rhs(x + h2 * a2, y + h2 * b2, vx + h2 * c2, vy + h2 * d2)
        a4, b4, c4, d4 = rhs(x + dtau * a3, y + dtau * b3, vx + dtau * c3, vy + dtau * d3)
        x += h6 * (a1 + 2.0 * (a2 + a3) + a4)
        y += h6 * (b1 + 2.0 * (b2 + b3) + b4)
        vx += h6 * (c1 + 2.0 * (c2 + c3) + c4)
        vy += h6 * (d1 + 2.0 * (d2 + d3) + d4)
        if not math.isfinite(x + y + vx + vy):
            raise PropagationError(f"classical state became non-finite at step {i}")
        done = until is not None and until(x, y)
        if i % stride == 0 or i == n_steps or done:
            out.append((initial.tau + i * dtau, x, y, vx, vy))
        if done:
            break
    return np.array(out)


def incident_state(center, k: float) -> ClassicalState:
    """Particle launched along +xi at group speed 2k."""
    return ClassicalState(tuple(center), (2.0 * k, 0.0))


def exit_slope(path: np.ndarray) -> float:
    """d eta / d xi of the final velocity."""
    return float(path[-1, 4] / path[-1, 3])


def traverse(params: ModelParams, center, k: float, xi_end: float, dtau: float = 1e-5,
             stride: int = 10):
    """Integrate from ``center`` until the particle passes ``xi_end``."""
    speed = 2.0 * k
    span = abs(xi_end - center[0])
    # generous step budget: deflected paths are longer than the straight line
    n = int(np.ceil(3.0 * span / speed / dtau))
    return integrate_rk4(incident_state(center, k), params, dtau, n, stride,
                         until=lambda x, y: x >= xi_end)


def eta_at_xi(path: np.ndarray, xi) -> np.ndarray:
    """Interpolate eta(xi) along a path that is monotone in xi."""
    if np.any(np.diff(path[:, 1]) <= 0):
        raise ValueError("path is not monotone in xi")
    return np.interp(xi, path[:, 1], path[:, 2])


def write_path_csv(path_file, path: np.ndarray):
    with open(path_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATH_HEADER)
        for row in path:
            w.writerow([repr(float(v)) for v in row])
