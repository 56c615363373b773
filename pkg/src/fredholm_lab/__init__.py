"""Fredholm conditions and essential spectra on model non-compact manifolds.

The package decides whether a geometric differential operator is Fredholm
and computes its essential spectrum by combining three ingredients:

* stratified compactification descriptors for the supported geometries
  (cylindrical ends, scattering ends, edge and hyperbolic-type ends,
  blow-ups of points and curves),
* symbolic extraction of the boundary limit operators, with the frame
  fields that vanish on a stratum turned into invariant "ghost"
  derivatives on the stratum's isotropy group,
* invertibility and spectrum computations for the resulting invariant
  operator families, cross-checked by an independent finite-difference
  oracle.
"""

__version__ = "0.1.0"

from .expr import (  # noqa: F401
    ParseError,
    parse_expr,
    print_expr,
    differentiate,
    evaluate_expr,
)
