"""Certified analysis and simulation of a switched station-keeping controller."""

__version__ = "0.1.0"

from .poly import Polynomial, lie_derivative
from .expr import Expr, parse_expr
from .sets import SemialgSet, parse_set
from .dynamics import (
    COHERENCE, V_CST, HybridSystem, Mode, VectorField, regions, station_keeping_model,
)
from .feasibility import DEFAULT_BOX, Box, Budget
from .certify import (
    DISPROVED, PROVED, UNDETERMINED, Certificate, Claim, contains, darboux_invariance,
    di_check, interval_eval, invariance_check, sign_certify,
)
from .darboux import DarbouxPair, FirstIntegral, first_integrals, search, verify
from .reach import StageSpec, run_chain, sp_check, station_keeping_stages

__all__ = [
    "__version__",
    "Polynomial", "lie_derivative", "Expr", "parse_expr", "SemialgSet", "parse_set",
    "COHERENCE", "V_CST", "HybridSystem", "Mode", "VectorField", "regions", "station_keeping_model",
    "DEFAULT_BOX", "Box", "Budget",
    "PROVED", "DISPROVED", "UNDETERMINED", "Certificate", "Claim", "contains", "darboux_invariance",
    "di_check", "interval_eval", "invariance_check", "sign_certify",
    "DarbouxPair", "FirstIntegral", "first_integrals", "search", "verify",
    "StageSpec", "run_chain", "sp_check", "station_keeping_stages",
]
