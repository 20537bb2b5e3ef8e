"""Numerical checks linking no-arbitrage to thermodynamic geometry.

Submodules: :mod:`~arbgeom.forms` (1-forms, Boyling counterexample),
:mod:`~arbgeom.expfam` (exponential-family geometry),
:mod:`~arbgeom.sufficiency` (enumerative sufficiency probes),
:mod:`~arbgeom.market_graph` (cycle arbitrage on rate graphs),
:mod:`~arbgeom.dynamics` (Onsager transport and gradient flow),
:mod:`~arbgeom.cli` (command line).
"""

from . import dynamics, expfam, forms, market_graph, sufficiency
from .errors import ArbGeomError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["ArbGeomError", "BACKEND", "dynamics", "expfam", "forms", "market_graph", "sufficiency"]
