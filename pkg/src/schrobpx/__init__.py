"""Classical emulation of a Schrödingerized, BPX-preconditioned linear solver."""

__version__ = "0.1.0"

from .bpx import (FactoredPreconditioner, bpx_preconditioner, build_ladder, compose_prolongation,
                  preconditioned_spectrum, two_level_prolongation)
from .config import RunConfig
from .fem import assemble, error_norms, manufactured
from .mesh import build_hierarchy
from .schrodinger import (build_augmented, build_profile, choose_domain, evolve, exact_z,
                          recover)

__all__ = [
    "FactoredPreconditioner", "RunConfig", "assemble", "bpx_preconditioner", "build_augmented",
    "build_hierarchy", "build_ladder", "build_profile", "choose_domain", "compose_prolongation",
    "error_norms", "evolve", "exact_z", "manufactured", "preconditioned_spectrum", "recover",
    "two_level_prolongation",
]
