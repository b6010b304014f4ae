"""Pointwise kernels used inside the time loop.

Every kernel has a numba flavour and a numpy flavour with identical
semantics. The public names dispatch on ``JIT_ENABLED``; the suffixed
variants stay importable so the benchmark can time both in one process.

All factors handed to the kernels are separable: the potential kick depends on
xi through two 1D tables and on eta through one phase table, and the kinetic
propagator factorises as ``exp(-i kx^2 t) * exp(-i ky^2 t)``.
"""

import numpy as np

from ._jit import JIT_ENABLED, njit, prange

MOMENT_FIELDS = ("s0", "sx", "sy", "sxx", "syy", "s0_left")
N_MOMENTS = len(MOMENT_FIELDS)


# --------------------------------------------------------------------------
# numba flavour

@njit(parallel=True, fastmath=False, cache=True)
def kick_numba(f, g, diag, coup, phase):
    nx, ny = f.shape
    for i in prange(nx):
        a = diag[i]
        ac = a.conjugate()
        s = coup[i]
        for j in range(ny):
            b = -1j * s * phase[j]
            fi = f[i, j]
            gi = g[i, j]
            f[i, j] = a * fi + b * gi
            g[i, j] = -b.conjugate() * fi + ac * gi


@njit(parallel=True, fastmath=False, cache=True)
def separable_scale_numba(arr, px, py):
    nx, ny = arr.shape
    for i in prange(nx):
        p = px[i]
        for j in range(ny):
            arr[i, j] *= p * py[j]


@njit(parallel=True, fastmath=False, cache=True)
def moments_numba(psi, x, y, xcut):
    nx, ny = psi.shape
    rows = np.zeros((nx, 6))
    for i in prange(nx):
        xi = x[i]
        s0 = 0.0
        sy = 0.0
        syy = 0.0
        for j in range(ny):
            v = psi[i, j]
            p = v.real * v.real + v.imag * v.imag
            s0 += p
            sy += p * y[j]
            syy += p * y[j] * y[j]
        rows[i, 0] = s0
        rows[i, 1] = s0 * xi
        rows[i, 2] = sy
        rows[i, 3] = s0 * xi * xi
        rows[i, 4] = syy
        rows[i, 5] = s0 if xi < xcut else 0.0
    # row partials are summed sequentially so the result does not depend on
    # the thread count
    out = np.zeros(6)
    for i in range(nx):
        for m in range(6):
            out[m] += rows[i, m]
    return out


# --------------------------------------------------------------------------
# numpy flavour

def kick_numpy(f, g, diag, coup, phase):
    a = diag[:, None]
    b = -1j * coup[:, None] * phase[None, :]
    fi = f.copy()
    f *= a
    f += b * g
    g *= np.conj(a)
    g -= np.conj(b) * fi


def separable_scale_numpy(arr, px, py):
    arr *= px[:, None]
    arr *= py[None, :]


def moments_numpy(psi, x, y, xcut):
    p = psi.real**2 + psi.imag**2
    row = p.sum(axis=1)
    out = np.empty(6)
    out[0] = row.sum()
    out[1] = row @ x
    out[2] = p.sum(axis=0) @ y
    out[3] = row @ (x * x)
    out[4] = p.sum(axis=0) @ (y * y)
    out[5] = row[x < xcut].sum()
    return out


if JIT_ENABLED:
    kick = kick_numba
    separable_scale = separable_scale_numba
    moments = moments_numba
else:
    kick = kick_numpy
    separable_scale = separable_scale_numpy
    moments = moments_numpy


def backend_name():
    return "numba" if JIT_ENABLED else "numpy"
