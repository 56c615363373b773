"""Limit operators at the boundary strata of a stratified space.

Approaching a boundary stratum, frame fields split in two: fields that
vanish on the stratum survive only as invariant generators of the isotropy
group (we call them ghosts), while the others restrict to honest vector
fields on the orbit.  Coefficients freeze to their boundary values.  The
result is an operator on the stratum's carrier ``orbit x G`` built from the
same generator words, with ghosts acting as right-invariant derivatives on
the group factor: they commute with the frozen coefficients but keep their
bracket relations with everything else.

Extraction is a homomorphism for composition; this holds here by
construction (ghost generators pass through coefficients, surviving ones
differentiate the frozen coefficient, and the bracket table is inherited
unchanged), and the test-suite checks it on random operator pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .calculus import DiffOp, Frame, FrameGen, frame_for
from .expr import LimitError, nf_to_expr, print_expr
from .geometry import (
    IsotropyGroup,
    StratifiedSpace,
    Stratum,
    boundary_limit_nf,
)

__all__ = [
    "LimitsError", "GhostInfo", "ghost_split", "ghost_weight", "limit_frame",
    "LimitOperator", "limit_operator", "all_limit_operators",
]


class LimitsError(ValueError):
    pass


@dataclass(frozen=True)
class GhostInfo:
    """An invariant generator of the boundary isotropy group."""

    name: str
    covar: str
    weight: Fraction  # leading rate at which the field dies on the stratum


def _stratum_with_frame(space: StratifiedSpace, stratum_id: str) -> Stratum:
    s = space.stratum(stratum_id)
    if s.depth == 0:
        raise LimitsError("the interior carries no limit operator")
    if not s.frame_valid and not s.frame_vanishing:
        raise LimitsError(
            f"stratum {stratum_id!r} has no frame decomposition; operator "
            f"extraction there is not supported")
    return s


def ghost_split(space: StratifiedSpace, stratum_id: str):
    """-> (ghost generator names, surviving generator names), frame order."""
    s = _stratum_with_frame(space, stratum_id)
    ghosts = tuple(g.name for g in space.gens if g.name in s.frame_vanishing)
    alive = tuple(g.name for g in space.gens if g.name in s.frame_valid
                  and g.name not in s.frame_vanishing)
    return ghosts, alive


def ghost_weight(space: StratifiedSpace, stratum_id: str,
                 gen_name: str) -> Fraction:
    """Leading coefficient of a vanishing frame field at the stratum.

    For a field ``a(x) d/dx_c`` this is the frozen value of ``a`` when that
    is a nonzero constant (fields dying only in the escape direction), else
    the frozen derivative of ``a`` along the substituted face variable."""
    g = space.gen(gen_name)
    a = g.action_nf()
    frozen = boundary_limit_nf(a, space, stratum_id)
    c = frozen.as_const()
    if c is not None and c != 0:
        return c
    plan = space.limit_plan(stratum_id)
    for step in plan.steps:
        if step[0] == "subst" and a.depends_on(step[1]):
            d = boundary_limit_nf(a.derivative(step[1]), space, stratum_id)
            dc = d.as_const()
            if dc is not None and dc != 0:
                return dc
    raise LimitsError(
        f"frame field {gen_name!r} degenerates to higher order at "
        f"{stratum_id!r}")


def limit_frame(space: StratifiedSpace, stratum_id: str,
                parent: Optional[Frame] = None) -> Frame:
    """The stratum's frame: ghosts become abstract invariant generators.

    Generator order, covariables and the bracket table are inherited from
    the parent frame, so operators upstairs and downstairs share normal
    forms term for term."""
    fr = parent if parent is not None else frame_for(space)
    s = _stratum_with_frame(space, stratum_id)
    gens = []
    for g in fr.gens:
        if g.name in s.frame_vanishing:
            gens.append(FrameGen(g.name, g.covar, None, ghost=True))
        else:
            a, coord = g.action
            gens.append(FrameGen(g.name, g.covar,
                                 (boundary_limit_nf(a, space, stratum_id),
                                  coord)))
    return Frame(gens, brackets=fr.brackets)


@dataclass
class LimitOperator:
    """An extracted boundary operator on ``orbit x G``."""

    space: StratifiedSpace
    stratum_id: str
    op: DiffOp
    ghosts: tuple  # GhostInfo, in frame order
    orbit_coords: tuple
    base_coords: tuple
    isotropy: IsotropyGroup
    carrier: str

    def is_family(self) -> bool:
        """True when the coefficients still depend on the stratum base."""
        return any(c.depends_on(v) for c in self.op.coefficients()
                   for v in self.base_coords)

    def is_zero(self) -> bool:
        return all(not self.op.entries[i][j] for i in range(self.op.shape)
                   for j in range(self.op.shape))

    def describe(self) -> str:
        lines = [f"stratum {self.stratum_id}: carrier {self.carrier}"]
        if self.ghosts:
            gh = ", ".join(f"{g.name} (weight {g.weight})"
                           for g in self.ghosts)
            lines.append(f"ghost generators: {gh}")
        if self.orbit_coords:
            lines.append("orbit coordinates: "
                         + ", ".join(self.orbit_coords))
        if self.base_coords and self.is_family():
            lines.append("family over base: " + ", ".join(self.base_coords))
        lines.append(self.op.describe())
        return "\n".join(lines)


def limit_operator(p: DiffOp, stratum_id: str) -> LimitOperator:
    """Extract the limit of ``p`` at one boundary stratum."""
    space = p.space
    s = _stratum_with_frame(space, stratum_id)
    lframe = limit_frame(space, stratum_id, p.frame)
    entries = []
    for i in range(p.shape):
        row = []
        for j in range(p.shape):
            frozen = {}
            for w, c in p.entries[i][j].items():
                try:
                    fc = boundary_limit_nf(c, space, stratum_id)
                except LimitError as err:
                    raise LimitsError(
                        f"coefficient {print_expr(nf_to_expr(c))!r} has no "
                        f"boundary value at {stratum_id!r}: {err}") from err
                if not fc.is_zero():
                    frozen[w] = fc
            row.append(frozen)
        entries.append(row)
    op = DiffOp(space, lframe, p.shape, entries)
    plan = space.limit_plan(stratum_id)
    ghosts = tuple(GhostInfo(g.name, g.covar,
                             ghost_weight(space, stratum_id, g.name))
                   for g in space.gens if g.name in s.frame_vanishing)
    carrier = f"{s.orbit_base.describe()} x {s.isotropy.describe()}"
    return LimitOperator(space, stratum_id, op, ghosts,
                         tuple(plan.orbit_coords), tuple(plan.base_coords),
                         s.isotropy, carrier)


def all_limit_operators(p: DiffOp) -> list:
    """Limit operators at every boundary stratum, in filtration order."""
    out = []
    for s in p.space.boundary_strata:
        out.append(limit_operator(p, s.id))
    return out
