"""Validated numerics for analytic iterated function systems on [0,1].

Submodules: ``expr`` (map DSL), ``interval``/``jet``/``enclosure`` (rigorous
arithmetic), ``maps``/``words`` (systems and compositions), ``dual`` (lifted
operators and their cylinders), ``calculus``, ``separation``, ``dimension``,
``conjugation``, ``perturbation`` and ``cli``.
"""

from .errors import DualIFSError
from .expr import parse_expr, parse_map, to_source
from .interval import Interval
from .jet import Jet
from .maps import IFS, AnalyticMap, validate_map
from .words import Word

__all__ = [
    "AnalyticMap",
    "DualIFSError",
    "IFS",
    "Interval",
    "Jet",
    "Word",
    "parse_expr",
    "parse_map",
    "to_source",
    "validate_map",
]
