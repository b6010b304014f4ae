"""Density snapshot files.

Each snapshot ``snap_NNNN`` is a set of flat row-major little-endian float64
files (``.f.bin`` for |f|^2, ``.g.bin`` for |g|^2, and ``.ft.bin``/``.gt.bin``
for the adiabatic densities when requested) plus a ``.txt`` sidecar with
``key = value`` lines: dims, ranges, tau, gauge and the list of arrays.
Row index is xi, column index is eta.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .gauge import TO_ADIABATIC, adiabatic_transform

DTYPE = "<f8"


def _dump(path: Path, arr):
    np.ascontiguousarray(arr, dtype=DTYPE).tofile(path)


def write_snapshot(directory, index: int, field, grid, adiabatic_params=None) -> Path:
    """Write one snapshot; returns the sidecar path."""
    directory = Path(directory)
    stem = directory / f"snap_{index:04d}"
    arrays = {"f": np.abs(field.f) ** 2, "g": np.abs(field.g) ** 2}
    if adiabatic_params is not None:
        ad = adiabatic_transform(field, grid, adiabatic_params, TO_ADIABATIC)
        arrays["ft"] = np.abs(ad.f) ** 2
        arrays["gt"] = np.abs(ad.g) ** 2
    for key, arr in arrays.items():
        _dump(stem.with_name(stem.name + f".{key}.bin"), arr)
    spec = grid.spec
    lines = [
        f"n_xi = {spec.n_xi}",
        f"n_eta = {spec.n_eta}",
        f"xi_range = {spec.xi_range[0]!r}, {spec.xi_range[1]!r}",
        f"eta_range = {spec.eta_range[0]!r}, {spec.eta_range[1]!r}",
        f"tau = {field.tau!r}",
        f"gauge = {field.gauge}",
        "dtype = float64 little-endian, row-major (xi, eta)",
        f"arrays = {', '.join(arrays)}",
    ]
    side = stem.with_suffix(".txt")
    side.write_text("\n".join(lines) + "\n")
    return side


def read_snapshot(sidecar):
    """Returns (meta dict, {name: (n_xi, n_eta) array})."""
    sidecar = Path(sidecar)
    meta = {}
    for line in sidecar.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    shape = (int(meta["n_xi"]), int(meta["n_eta"]))
    out = {}
    for key in (s.strip() for s in meta["arrays"].split(",")):
        path = sidecar.with_name(sidecar.stem + f".{key}.bin")
        out[key] = np.fromfile(path, dtype=DTYPE).reshape(shape)
    meta["tau"] = float(meta["tau"])
    return meta, out
