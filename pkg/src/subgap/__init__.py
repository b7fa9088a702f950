"""Sharp subelliptic orders for homogeneous special domains: algebra, geometry and numerics."""

__version__ = "0.1.0"

from .polyalg import JetSeries, MultiPoly, PolyMap, compose_jet, det_jacobian, evaluate, jacobian, vanishing_order
from .typeinv import TypeReport, sharp_order, t_invariant, type_report

__all__ = [
    "JetSeries",
    "MultiPoly",
    "PolyMap",
    "TypeReport",
    "compose_jet",
    "det_jacobian",
    "evaluate",
    "jacobian",
    "sharp_order",
    "t_invariant",
    "type_report",
    "vanishing_order",
]
