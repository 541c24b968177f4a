"""sqflab: a numerical laboratory for multilinear square functions.

Grids and quadrature (:mod:`sqflab.grid`), kernel families and condition
auditors (:mod:`sqflab.kernels`), the square function and its maximal
variants (:mod:`sqflab.operators`), maximal functions (:mod:`sqflab.maximal`),
the dyadic stopping-time decomposition (:mod:`sqflab.czd`), Muckenhoupt
weights (:mod:`sqflab.weights`), the inequality harness
(:mod:`sqflab.verify`), and a config-driven CLI (:mod:`sqflab.cli`).
"""

__version__ = "0.1.0"

from .grid import Box, DyadicTree, Field  # noqa: F401
