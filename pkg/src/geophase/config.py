"""Scenario configuration files.

Configs are INI files (``key = value`` under sections). Numbers may be
written as fractions (``25/9``); lists are comma separated. Example::

    [scenario]
    name = below_threshold

    [model]
    delta = 200
    beta = 2
    flux = constant
    phi = 6

    [packet]
    center = -4, 0
    widths = 0.5, 0.5
    carrier = 12, 0
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

from .gauge import ConstantFlux, LensFlux, ModelParams
from .spectral import GridSpec, PacketSpec, RunConfig

SCENARIOS = (
    "below_threshold",
    "above_threshold",
    "table1_sweep",
    "lens_rays",
    "lens_slab",
    "interferometer",
    "verify_fields",
)


def parse_number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_list(text: str) -> List[float]:
    return [parse_number(t) for t in text.split(",") if t.strip()]


def _pair(text):
    vals = parse_list(text)
    if len(vals) != 2:
        raise ValueError(f"expected two numbers, got {text!r}")
    return tuple(vals)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ScenarioConfig:
    scenario: str
    grid: GridSpec = field(default_factory=GridSpec)
    run: RunConfig = field(default_factory=RunConfig)
    model: ModelParams = field(default_factory=lambda: ModelParams(200.0, 2.0, ConstantFlux(6.0)))
    packets: List[PacketSpec] = field(default_factory=lambda: [PacketSpec()])
    sweep: Dict[str, List[float]] = field(default_factory=dict)
    # analysis window and stopping distance
    xi_gate: Optional[float] = None
    xi_stop: float = 3.5
    n_snapshot_files: int = 4
    adiabatic_snapshots: bool = False
    tail_tol: float = 1e-4
    workers: int = 1
    output_dir: str = "runs"
    source: Optional[str] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")

    @property
    def gate(self) -> float:
        """Start of the post-wall fit window; defaults to 3/beta."""
        return 3.0 / self.model.beta if self.xi_gate is None else self.xi_gate

    @property
    def k(self) -> float:
        return float(self.packets[0].carrier[0])

    def with_overrides(self, grid_n=None, dtau=None, workers=None, output_dir=None):
        cfg = dataclasses.replace(self)
        if grid_n is not None:
            cfg.grid = dataclasses.replace(cfg.grid, n_xi=int(grid_n), n_eta=int(grid_n))
        if dtau is not None:
            cfg.run = dataclasses.replace(cfg.run, dtau=float(dtau))
        if workers is not None:
            cfg.workers = int(workers)
        if output_dir is not None:
            cfg.output_dir = str(output_dir)
        return cfg

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["model"]["flux_kind"] = type(self.model.flux).__name__
        return d


def _model(sec) -> ModelParams:
    kind = sec.get("flux", "constant").strip().lower()
    if kind == "constant":
        flux = ConstantFlux(parse_number(sec.get("phi", "6")))
    elif kind == "lens":
        flux = LensFlux(
            k=parse_number(sec.get("k", "12")),
            f_lens=parse_number(sec.get("f_lens", "3")),
            gamma=parse_number(sec.get("gamma", "1")),
        )
    else:
        raise ValueError(f"flux must be 'constant' or 'lens', got {kind!r}")
    return ModelParams(parse_number(sec.get("delta", "200")), parse_number(sec.get("beta", "2")), flux)


def _packet(sec) -> PacketSpec:
    kw = {}
    for key in ("center", "widths", "carrier"):
        if key in sec:
            kw[key] = _pair(sec[key])
    if "channel" in sec:
        kw["channel"] = sec["channel"].strip()
    if "phase" in sec:
        kw["phase"] = parse_number(sec["phase"])
    if "slab_width" in sec:
        kw["slab_width"] = parse_number(sec["slab_width"])
    return PacketSpec(**kw)


def parse_config(text: str, source: Optional[str] = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    if not cp.has_section("scenario") or "name" not in cp["scenario"]:
        raise ValueError("config needs [scenario] name = ...")
    sc = cp["scenario"]
    cfg = ScenarioConfig(scenario=sc["name"].strip(), source=source)

    if cp.has_section("grid"):
        g = cp["grid"]
        n = int(g.get("n", "512"))
        cfg.grid = GridSpec(
            n_xi=int(g.get("n_xi", n)),
            n_eta=int(g.get("n_eta", n)),
            xi_range=_pair(g["xi_range"]) if "xi_range" in g else GridSpec().xi_range,
            eta_range=_pair(g["eta_range"]) if "eta_range" in g else GridSpec().eta_range,
        )
    if cp.has_section("run"):
        r = cp["run"]
        cfg.run = RunConfig(
            dtau=parse_number(r.get("dtau", "1e-4")),
            n_steps=int(r.get("n_steps", "0")),
            snapshot_stride=int(r.get("snapshot_stride", "10")),
            absorber=_bool(r.get("absorber", "off")),
            absorber_width=parse_number(r.get("absorber_width", "0.5")),
            absorber_power=parse_number(r.get("absorber_power", "0.125")),
        )
        if "xi_stop" in r:
            cfg.xi_stop = parse_number(r["xi_stop"])
        if "xi_gate" in r:
            cfg.xi_gate = parse_number(r["xi_gate"])
        if "tail_tol" in r:
            cfg.tail_tol = parse_number(r["tail_tol"])
    if cp.has_section("model"):
        cfg.model = _model(cp["model"])

    packets = [s for s in cp.sections() if s == "packet" or s.startswith("packet.")]
    if packets:
        cfg.packets = [_packet(cp[s]) for s in sorted(packets)]

    if cp.has_section("sweep"):
        cfg.sweep = {k: parse_list(v) for k, v in cp["sweep"].items()}
    if cp.has_section("output"):
        o = cp["output"]
        cfg.n_snapshot_files = int(o.get("snapshots", cfg.n_snapshot_files))
        cfg.adiabatic_snapshots = _bool(o.get("adiabatic", "off"))
        cfg.output_dir = o.get("dir", cfg.output_dir)
    if "workers" in sc:
        cfg.workers = int(sc["workers"])
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def preset_text(scenario: str) -> str:
    return resources.files("geophase.presets").joinpath(f"{scenario}.ini").read_text()


def load_preset(scenario: str) -> ScenarioConfig:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    return parse_config(preset_text(scenario), source=f"preset:{scenario}")
