"""Numerical laboratory for conformal changes of CAT(0) length spaces."""

__version__ = "0.1.0"

from .metric import LengthSpace, SpaceError, build_space, distance, geodesic  # noqa: E402
from .models import ModelSpec, exact_distance, generate  # noqa: E402
from .fields import Rule, ScalarField, make_field  # noqa: E402
from .conformal import conformal_change, exp_factor  # noqa: E402
from .cat0 import cat0_scan, comparison_test, majorization_check  # noqa: E402
from .targets import TargetSpace  # noqa: E402
from .harmonic import SpaceMap, ks_energy, solve_dirichlet, solve_plateau  # noqa: E402
from .pipeline import main_theorem_pipeline  # noqa: E402

__all__ = [
    "LengthSpace", "ModelSpec", "Rule", "ScalarField", "SpaceError", "SpaceMap", "TargetSpace", "build_space",
    "cat0_scan", "comparison_test", "conformal_change", "distance", "exact_distance", "exp_factor", "generate",
    "geodesic", "ks_energy", "main_theorem_pipeline", "majorization_check", "make_field", "solve_dirichlet",
    "solve_plateau",
]
