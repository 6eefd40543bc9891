"""mcflab: mean curvature flow with inscribed-sphere noncollapsing diagnostics
for immersed hypersurfaces."""

from .mesh import DiscreteHypersurface
from .curvature import CurvatureData, compute_curvature, curvature_bounds
from . import errors

__all__ = ["DiscreteHypersurface", "CurvatureData", "compute_curvature",
           "curvature_bounds", "errors"]
__version__ = "0.1.0"
