"""Developable fillings of generic closed space curves.

Typical use::

    from devfill import BoundaryCurve, enumerate_fillings
    result = enumerate_fillings(BoundaryCurve(points))
"""

from .bitangency import ScalarField, eval_D, grad_D, hess_D, sample_field, value_and_grad
from .config import RunConfig
from .continuation import continue_along, continue_solution
from .curve import BoundaryCurve
from .errors import *  # noqa: F401,F403
from .genericity import GenericityReport, genericity_report
from .oracle import KINDS, SyntheticCase, make_case
from .ruling import FillingResult, SolverConfig, enumerate_fillings
from .surface import DevelopableSurface, hausdorff_distance, mesh
from .zeroset import ZeroSet, extract_zero_set

__version__ = "0.1.0"
