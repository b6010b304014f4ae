"""Two-channel wave-packet propagation in a gauge-structured potential wall.

Submodules
----------
gauge       closed-form model physics (potentials, connection, induction)
spectral    grids, packets and the split-step propagator
observables centroids, deflection fits, transmission and fringes
classical   RK4 paths in the synthetic induction
scenarios   scenario drivers and artifact writers
"""

__version__ = "0.1.0"

from .gauge import (  # noqa: E402
    ConstantFlux,
    LensFlux,
    ModelParams,
    analytic_deflection,
    connection,
    effective_B,
    mixing_angle,
)
from .spectral import GridSpec, PacketSpec, RunConfig, SpinorField, build_grid, make_packet, propagate  # noqa: E402

__all__ = [
    "ConstantFlux",
    "LensFlux",
    "ModelParams",
    "analytic_deflection",
    "connection",
    "effective_B",
    "mixing_angle",
    "GridSpec",
    "PacketSpec",
    "RunConfig",
    "SpinorField",
    "build_grid",
    "make_packet",
    "propagate",
]
