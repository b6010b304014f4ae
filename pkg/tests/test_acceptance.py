"""Acceptance suite: the ten criteria at full resolution (512^2, dtau = 1e-4).

Each test prints exactly one ``PASS``/``FAIL`` line for its criterion; the
lines are repeated in the terminal summary. Heavy propagations are cached in
module fixtures and shared between criteria. Expect about 35 minutes on one
core.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import dataclasses
import time

import numpy as np
import pytest
from scipy.integrate import quad

from geophase.classical import exit_slope, traverse
from geophase.config import load_preset
from geophase.gauge import ConstantFlux, LensFlux, ModelParams, analytic_deflection, effective_B
from geophase.scenarios import (
    TABLE1_MEASURED,
    adiabatic_right_share,
    run_above_threshold,
    run_below_threshold,
    run_lens_rays,
    run_lens_slab,
    run_table1_sweep,
)
from geophase.spectral import RunConfig, build_grid, make_packet, propagate
from geophase.verify import closed_form_residual, curvature_residual, holonomy_deviation

pytestmark = pytest.mark.slow

K = 12.0
BELOW = ModelParams(200.0, 2.0, ConstantFlux(6.0))


def _preset(name, **changes):
    cfg = load_preset(name)
    return dataclasses.replace(cfg, **changes)


# ---- cached runs -------------------------------------------------------------

@pytest.fixture(scope="module")
def table():
    cfg = _preset("table1_sweep", workers=4)
    t0 = time.perf_counter()
    res = run_table1_sweep(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def below():
    return run_below_threshold(_preset("below_threshold", n_snapshot_files=0))


def _above(delta):
    cfg = _preset("above_threshold", n_snapshot_files=0)
    cfg.model = dataclasses.replace(cfg.model, delta=delta)
    return run_above_threshold(cfg)


@pytest.fixture(scope="module")
def above():
    # 2 delta / k^2 = 1/3 and 1/6
    return {"1/3": _above(K * K / 6), "1/6": _above(K * K / 12)}


# ---- criteria ------------------------------------------------------------------

def _cell_key(c):
    return (round(c.two_delta_over_k2, 9), round(c.phi_over_k, 9))


def test_c01_table1(table, criterion):
    res, wall = table
    want = {(round(a, 9), round(b, 9)): v for (a, b), v in TABLE1_MEASURED.items()}
    parts, ok = [], True
    for c in res.cells:
        ref = want[_cell_key(c)]
        good = c.error is None and abs(c.tan_measured - ref) <= 0.02
        ok &= good
        got = "error" if c.tan_measured is None else f"{c.tan_measured:.4f}"
        parts.append(f"({c.two_delta_over_k2:.3g},{c.phi_over_k:.3g}) {got} vs {ref}{'' if good else ' (out)'}")
    slowest = max(c.cpu_s for c in res.cells)
    ok &= slowest <= 120 and wall <= 900
    detail = "; ".join(parts) + f"; max run cpu {slowest:.0f}s; sweep wall {wall:.0f}s (4 workers)"
    assert criterion(1, "deflection table within +-0.02", ok, detail)


def test_c02_analytic_law(table, criterion):
    res, _ = table
    cells = {_cell_key(c): c for c in res.cells}
    rel = []
    for q in (1 / 2, 1 / 4, 1 / 12):
        c = cells[(round(25 / 9, 9), round(q, 9))]
        rel.append(abs(c.tan_measured - c.tan_analytic) / c.tan_analytic)
    hi = cells[(round(1.0, 9), round(0.5, 9))].tan_measured
    lo = cells[(round(25 / 9, 9), round(0.5, 9))].tan_measured
    ok = max(rel) <= 0.05 and hi > lo
    detail = (f"25/9 rows rel. dev {', '.join(f'{r:.2%}' for r in rel)} (<= 5%); "
              f"phi/k=1/2: {hi:.4f} at threshold > {lo:.4f}")
    assert criterion(2, "analytic deflection law and delta trend", ok, detail)


def test_c03_unitarity(criterion):
    cfg = load_preset("below_threshold")
    grid = build_grid(cfg.grid)
    psi = make_packet(grid, cfg.packets[0])
    n0 = psi.total_norm(grid)
    out, _ = propagate(psi, grid, BELOW, RunConfig(dtau=1e-4, n_steps=10_000, snapshot_stride=10_000))
    drift = abs(out.total_norm(grid) - n0)
    assert criterion(3, "norm drift over 1e4 steps, absorber off", drift <= 1e-10, f"{drift:.3e} (<= 1e-10)")


def test_c04_pure_gauge(criterion):
    rng = np.random.default_rng(4)
    res, order = curvature_residual(BELOW, rng, h=1e-3)
    hol = holonomy_deviation(BELOW, (-0.5, 0.5), (-0.5, 0.5), 10_000)
    ok = order >= 1.9 and res <= 1e-6 and hol <= 1e-6
    detail = f"curvature residual {res:.2e} at h=1e-3, order {order:.2f}; unit-square holonomy {hol:.2e}"
    assert criterion(4, "pure-gauge curvature and holonomy", ok, detail)


def test_c05_field_identities(criterion):
    devs = []
    for beta in (1.0, 2.0, 4.0):
        p = ModelParams(200.0, beta, ConstantFlux(6.0))
        val, _ = quad(lambda x: float(effective_B(x, 0.0, p)), -np.inf, np.inf, epsabs=1e-13, limit=200)
        devs.append(abs(val - 6.0))
    rng = np.random.default_rng(5)
    lens = ModelParams(400.0, 2.0, LensFlux(K, 3.0, 1.0))
    rel = max(closed_form_residual(lens, rng), closed_form_residual(BELOW, rng))
    ok = max(devs) <= 1e-8 and rel <= 1e-12
    detail = f"flux identity max dev {max(devs):.1e} (beta 1,2,4); closed forms vs general rule {rel:.1e} relative"
    assert criterion(5, "field identities", ok, detail)


def test_c06_classical_quantum(below, criterion):
    slope = abs(exit_slope(traverse(BELOW, (-4.0, 0.0), K, 4.0)))
    want = analytic_deflection(K, 6.0)
    rel = abs(slope - want) / want
    gap = below.classical_gap
    ok = rel <= 0.01 and gap is not None and gap <= 0.25
    detail = f"classical exit slope {slope:.5f} vs {want:.5f} ({rel:.2%}); max eta gap {gap:.4f} (<= 0.25)"
    assert criterion(6, "classical-quantum correspondence", ok, detail)


def test_c07_lens_rays(criterion):
    res = run_lens_rays(_preset("lens_rays", workers=4))
    f_lens = 3.0
    devs = []
    for r in res.rays:
        want = r.impact / (2 * f_lens)
        got = abs(r.deflection.tan_theta) if r.deflection else float("nan")
        devs.append(f"b={r.impact:g}: {got:.4f} vs {want:.4f}")
    tan_ok = all(r.deflection and abs(abs(r.deflection.tan_theta) - r.impact / (2 * f_lens))
                 <= 0.05 * r.impact / (2 * f_lens) for r in res.rays)
    spread = res.spread if res.spread is not None else float("inf")
    xs = [p[2] for p in res.crossings]
    ok = tan_ok and spread <= 0.15
    detail = (f"crossing spread {spread:.3f} (<= 0.15), crossings xi in [{min(xs):.2f}, {max(xs):.2f}], "
              f"mean {res.mean_crossing[0]:.3f},{res.mean_crossing[1]:.3f}; " + "; ".join(devs))
    assert criterion(7, "lens focusing (rays)", ok, detail)


def test_c08_slab(criterion):
    cfg = _preset("lens_slab", n_snapshot_files=0)
    res = run_lens_slab(cfg)
    free = run_lens_slab(cfg, ModelParams(0.0, 2.0, ConstantFlux(0.0)))
    post = res.tau > res.tau_lens
    full = res.full_width[post].min() / res.full_width[0]
    rms = res.rms_width[post].min() / res.rms_width[0]
    i = int(np.argmin(np.where(post, res.full_width, np.inf)))
    detail = (f"min full width / initial {full:.3f} (< 0.6) at tau {res.tau[i]:.3f}; "
              f"rms measure {rms:.3f}; lens crossed at tau {res.tau_lens:.3f}; "
              f"delta=0 control min full width / initial {free.full_width[post].min() / free.full_width[0]:.3f}")
    assert criterion(8, "slab focusing", full < 0.6, detail)


def test_c09_threshold(above, below, criterion):
    tf3, tf6 = above["1/3"].split[2], above["1/6"].split[2]
    tg = below.split[1]
    ok = tf3 > tf6 and tg <= 1e-3
    detail = f"transmitted f {tf3:.4f} (1/3) > {tf6:.4f} (1/6); below threshold transmitted g {tg:.2e} (<= 1e-3)"
    assert criterion(9, "threshold physics", ok, detail)


def test_c10_gauge_artifact(criterion):
    res = _above(0.0)
    sim = res.simulation
    nf = float(np.vdot(sim.final.f, sim.final.f).real * sim.grid.cell)
    share_f, _ = adiabatic_right_share(sim.final, sim.grid, ModelParams(0.0, 2.0, ConstantFlux(6.0)))
    right = sim.final.density()[sim.grid.xi > 0].sum() * sim.grid.cell
    ok = nf <= 1e-6 and share_f >= 0.99 and right > 0.99
    detail = (f"diabatic norm_f {nf:.1e} (<= 1e-6); adiabatic f~ share on xi>0 {share_f:.6f} (>= 0.99); "
              f"weight on xi>0 {right:.4f}")
    assert criterion(10, "gauge artifact at delta=0", ok, detail)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
