"""Stratified compactification descriptors for the supported model geometries.

A :class:`StratifiedSpace` is a finite, symbolic description of a compact
manifold with corners together with the Lie algebra of vector fields that
defines the analysis: which coordinates exist, which frame generators act,
which generators degenerate (vanish) on each boundary stratum, and what the
isotropy group of each stratum is.  Everything downstream — ellipticity
sampling, limit-operator extraction, the Fredholm predicate — consumes this
descriptor; nothing ever works with an actual manifold.

Supported constructions:

* cylindrical (b-type) ends over an interval, square, or cylinder, plus
  single-ended collars with point or circle cross-section;
* scattering ends (radial compactification of the plane or line);
* edge structures ``x dx, dy, x dz`` for a fibered boundary, with the
  degenerate cases (base a point, or base equal to the whole boundary)
  normalized to cylindrical and hyperbolic-type structures respectively;
* hyperbolic-type (ah) ends with all generators degenerating at the
  boundary;
* the translation groupoid of R^n acting on its radial compactification;
* blow-ups of interior points and of transverse curves, including the
  iterated pipeline that desingularizes a one-dimensional stratified set
  (points first, then the lifted curves).

The local model of a blown-up center is always the unit sphere bundle of its
normal bundle; the scale action of the normal directions survives as an
``R_+^*`` isotropy factor, which we keep in additive (logarithmic)
coordinates throughout, i.e. as a rank-one vector group.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

from .expr import (
    NF,
    Expr,
    LimitError,
    iterated_limit,
    nf_from_expr,
    nf_to_expr,
    parse_expr,
)


# ---------------------------------------------------------------------------
# Isotropy groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsotropyGroup:
    """Isotropy attached to a stratum.

    kind is one of ``trivial``, ``real_vector`` (R^k, written additively),
    ``rn_rplus`` (R^n semidirect R_+^*, the solvable non-abelian group of
    dilations and translations), or ``tagged`` (an opaque label with a
    declared amenability bit, used to model hypotheses failing).
    """

    kind: str
    rank: int = 0
    name: str = ""
    amenable_flag: bool = True

    @property
    def dim(self) -> int:
        if self.kind == "trivial":
            return 0
        if self.kind == "real_vector":
            return self.rank
        if self.kind == "rn_rplus":
            return self.rank + 1
        return self.rank

    @property
    def amenable(self) -> bool:
        if self.kind == "tagged":
            return self.amenable_flag
        return True  # abelian and solvable groups are amenable

    @property
    def abelian(self) -> bool:
        if self.kind in ("trivial", "real_vector"):
            return True
        if self.kind == "rn_rplus":
            return False
        return False

    def describe(self) -> str:
        if self.kind == "trivial":
            return "trivial"
        if self.kind == "real_vector":
            return f"R^{self.rank}"
        if self.kind == "rn_rplus":
            return f"R^{self.rank} x| R+*"
        return f"tagged({self.name}, amenable={self.amenable_flag})"


def Trivial() -> IsotropyGroup:
    return IsotropyGroup("trivial")


def RealVector(k: int) -> IsotropyGroup:
    if k < 0:
        raise ValueError("rank must be nonnegative")
    if k == 0:
        return Trivial()
    return IsotropyGroup("real_vector", rank=k)


def SemidirectRnRplus(n: int) -> IsotropyGroup:
    """R^n x| R_+^*; for n = 0 this is R_+^* alone, which we always keep in
    logarithmic coordinates and therefore normalize to the vector group R."""
    if n < 0:
        raise ValueError("rank must be nonnegative")
    if n == 0:
        return RealVector(1)
    return IsotropyGroup("rn_rplus", rank=n)


def Tagged(name: str, amenable: bool, dim: int = 0) -> IsotropyGroup:
    return IsotropyGroup("tagged", rank=dim, name=name, amenable_flag=amenable)


# ---------------------------------------------------------------------------
# Shapes (orbit bases, fibers, carriers)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Shape:
    kind: str  # point | interval | circle | two_points | product
    factors: tuple["Shape", ...] = ()

    @property
    def dim(self) -> int:
        if self.kind == "product":
            return sum(f.dim for f in self.factors)
        if self.kind in ("point", "two_points"):
            return 0
        return 1

    def describe(self) -> str:
        if self.kind == "product":
            return " x ".join(f.describe() for f in self.factors)
        return {"point": "point", "interval": "interval", "circle": "circle",
                "two_points": "two points"}[self.kind]


POINT = Shape("point")
INTERVAL = Shape("interval")
CIRCLE = Shape("circle")
TWO_POINTS = Shape("two_points")


def product_shape(*factors: Shape) -> Shape:
    flat = [f for f in factors if f.kind != "point"]
    if not flat:
        return POINT
    if len(flat) == 1:
        return flat[0]
    return Shape("product", tuple(flat))


# ---------------------------------------------------------------------------
# Strata, coordinates, frame generator specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stratum:
    id: str
    dim: int
    depth: int
    orbit_base: Shape
    fiber: Shape
    isotropy: IsotropyGroup
    frame_valid: tuple[str, ...] = ()
    frame_vanishing: tuple[str, ...] = ()
    groupoid_model: str = ""

    def describe(self) -> str:
        return (f"{self.id}: dim {self.dim}, depth {self.depth}, "
                f"base {self.orbit_base.describe()}, fiber {self.fiber.describe()}, "
                f"isotropy {self.isotropy.describe()}")


@dataclass(frozen=True)
class Coord:
    name: str
    kind: str  # line | bdf1 | bdf2 | angle


@dataclass(frozen=True)
class GenSpec:
    """A frame generator: ``action_coeff * d/d(coord)`` in chart coordinates."""

    name: str
    covar: str
    coord: str
    action_coeff: str  # expression source in the chart coordinates

    def action_nf(self) -> NF:
        return nf_from_expr(parse_expr(self.action_coeff))


@dataclass(frozen=True)
class BlowupRecord:
    center_id: str
    center_kind: str  # point | curve
    center_dim: int
    new_hyperface: str
    new_depth: int
    note: str = ""


@dataclass(frozen=True)
class LimitPlan:
    """How coefficients are frozen at a stratum.

    ``steps`` feed :func:`fredholm_lab.expr.iterated_limit`; ``alt_steps``
    (when set) is a second admissible order that must agree — this is how
    corner strata enforce that the two iterated one-variable limits match.
    ``orbit_coords`` survive into the limit operator as coordinates on the
    orbit; ``base_coords`` parameterize the orbit space B_S and are frozen
    per orbit.
    """

    steps: tuple
    orbit_coords: tuple[str, ...] = ()
    base_coords: tuple[str, ...] = ()
    alt_steps: Optional[tuple] = None


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class StratifiedSpace:
    geometry_class: str  # b | sc | edge | ah | transformation | smooth
    ambient_dim: int
    strata: tuple[Stratum, ...]
    coords: tuple[Coord, ...] = ()
    gens: tuple[GenSpec, ...] = ()
    bdf_names: tuple[str, ...] = ()
    records: tuple[BlowupRecord, ...] = ()
    label: str = ""
    limit_plans: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ids = [s.id for s in self.strata]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate stratum ids")
        depths = [s.depth for s in self.strata]
        if list(self.strata) != sorted(self.strata, key=lambda s: s.depth):
            raise GeometryError("strata must be listed by increasing depth "
                                "(the filtration order)")
        if depths and depths[0] != 0:
            raise GeometryError("first stratum must be the interior (depth 0)")
        gen_names = {g.name for g in self.gens}
        for s in self.strata:
            if s.orbit_base.dim + s.fiber.dim != s.dim:
                raise GeometryError(
                    f"stratum {s.id}: orbit base dim + fiber dim != stratum dim")
            if s.depth > 0 and self.gens:
                if len(s.frame_vanishing) != s.isotropy.dim:
                    raise GeometryError(
                        f"stratum {s.id}: {len(s.frame_vanishing)} vanishing "
                        f"generators but isotropy dimension {s.isotropy.dim}")
                for name in s.frame_vanishing + s.frame_valid:
                    if name not in gen_names:
                        raise GeometryError(
                            f"stratum {s.id} references unknown generator {name!r}")

    # -- accessors --------------------------------------------------------

    def stratum(self, stratum_id: str) -> Stratum:
        for s in self.strata:
            if s.id == stratum_id:
                return s
        raise GeometryError(f"no stratum named {stratum_id!r}")

    @property
    def interior(self) -> Stratum:
        return self.strata[0]

    @property
    def boundary_strata(self) -> tuple[Stratum, ...]:
        return tuple(s for s in self.strata if s.depth > 0)

    @property
    def depth(self) -> int:
        return max((s.depth for s in self.strata), default=0)

    def filtration(self) -> list[tuple[str, ...]]:
        """U_0 subset U_1 subset ... as cumulative tuples of stratum ids."""
        out = []
        acc: list[str] = []
        for d in range(self.depth + 1):
            acc.extend(s.id for s in self.strata if s.depth == d)
            out.append(tuple(acc))
        return out

    def coord(self, name: str) -> Coord:
        for c in self.coords:
            if c.name == name:
                return c
        raise GeometryError(f"no coordinate named {name!r}")

    def coord_names(self) -> set[str]:
        return {c.name for c in self.coords}

    def gen(self, name: str) -> GenSpec:
        for g in self.gens:
            if g.name == name:
                return g
        raise GeometryError(f"no frame generator named {name!r}")

    def limit_plan(self, stratum_id: str) -> LimitPlan:
        try:
            return self.limit_plans[stratum_id]
        except KeyError:
            raise GeometryError(
                f"stratum {stratum_id!r} has no boundary approach data "
                f"(is it the interior?)") from None

    def describe(self) -> str:
        lines = [f"{self.geometry_class} space"
                 + (f" ({self.label})" if self.label else "")
                 + f", dimension {self.ambient_dim}, depth {self.depth}"]
        for s in self.strata:
            lines.append("  " + s.describe())
        for r in self.records:
            lines.append(f"  blow-up of {r.center_kind} {r.center_id} -> "
                         f"hyperface {r.new_hyperface} (depth {r.new_depth})")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_scattering_space(n: int) -> StratifiedSpace:
    """Radial compactification of R^n (n = 1 or 2); all frame fields are
    degenerate at infinity and the isotropy at each boundary point is the
    full translation group R^n."""
    if n == 1:
        strata = (
            Stratum("interior", 1, 0, INTERVAL, POINT, Trivial(),
                    ("dt",), ()),
            Stratum("tminus", 0, 1, POINT, POINT, RealVector(1),
                    ("dt",), ("dt",), groupoid_model="point x R"),
            Stratum("tplus", 0, 1, POINT, POINT, RealVector(1),
                    ("dt",), ("dt",), groupoid_model="point x R"),
        )
        plans = {
            "tminus": LimitPlan((("escape", "t", -1),)),
            "tplus": LimitPlan((("escape", "t", +1),)),
        }
        return StratifiedSpace(
            "sc", 1, strata, coords=(Coord("t", "line"),),
            gens=(GenSpec("dt", "xi", "t", "1"),),
            label="line, scattering ends", limit_plans=plans)
    if n == 2:
        strata = (
            Stratum("interior", 2, 0, Shape("product", (INTERVAL, INTERVAL)),
                    POINT, Trivial(), ("dt1", "dt2"), ()),
            Stratum("circle_inf", 1, 1, CIRCLE, POINT, RealVector(2),
                    ("dt1", "dt2"), ("dt1", "dt2"),
                    groupoid_model="circle x R^2"),
        )
        plans = {
            "circle_inf": LimitPlan((("radial", ("t1", "t2"), "th"),),
                                    base_coords=("th",)),
        }
        return StratifiedSpace(
            "sc", 2, strata,
            coords=(Coord("t1", "line"), Coord("t2", "line")),
            gens=(GenSpec("dt1", "xi1", "t1", "1"),
                  GenSpec("dt2", "xi2", "t2", "1")),
            label="plane, scattering end", limit_plans=plans)
    raise GeometryError("scattering spaces are supported for n = 1 or 2")


_B_FACTORS = {"interval", "circle"}


def build_b_space(profile: Union[str, Sequence[str]]) -> StratifiedSpace:
    """Cylindrical-end space for a small corner profile.

    ``profile`` is either a product of 1-d factors (``["interval"]``,
    ``["interval", "interval"]``, ``["interval", "circle"]``; the strings
    ``"interval"``, ``"square"``, ``"cylinder"`` are accepted as synonyms) or
    one of the single-ended collars ``"point_end"`` / ``"circle_end"`` whose
    boundary is a single point or circle.  Corner depth beyond 2 is rejected.
    """
    if isinstance(profile, str):
        profile = {
            "interval": ["interval"],
            "square": ["interval", "interval"],
            "cylinder": ["interval", "circle"],
            "point_end": ["point_end"],
            "circle_end": ["circle_end"],
        }.get(profile, [profile])
    profile = list(profile)
    if profile == ["point_end"]:
        return _b_collar(POINT)
    if profile == ["circle_end"]:
        return _b_collar(CIRCLE)
    if any(f not in _B_FACTORS for f in profile):
        raise GeometryError(f"unknown profile factors in {profile!r}")
    n_int = profile.count("interval")
    if n_int == 0:
        raise GeometryError("a cylindrical-end profile needs at least one "
                            "interval factor (a bare circle has no boundary)")
    if n_int > 2:
        raise GeometryError("corner depth > 2 is not supported")
    if len(profile) > 2:
        raise GeometryError("profiles with more than two factors are not "
                            "supported")
    if n_int == 1 and len(profile) == 1:
        return _b_interval()
    if n_int == 2:
        return _b_square()
    return _b_cylinder()


def _b_interval() -> StratifiedSpace:
    strata = (
        Stratum("interior", 1, 0, INTERVAL, POINT, Trivial(), ("x_dx",), ()),
        Stratum("x0", 0, 1, POINT, POINT, RealVector(1),
                ("x_dx",), ("x_dx",), groupoid_model="point x R"),
        Stratum("x1", 0, 1, POINT, POINT, RealVector(1),
                ("x_dx",), ("x_dx",), groupoid_model="point x R"),
    )
    plans = {
        "x0": LimitPlan((("subst", "x", Fraction(0)),)),
        "x1": LimitPlan((("subst", "x", Fraction(1)),)),
    }
    return StratifiedSpace(
        "b", 1, strata, coords=(Coord("x", "bdf2"),),
        gens=(GenSpec("x_dx", "xi", "x", "x*(1 - x)"),),
        bdf_names=("x", "1 - x"),
        label="interval, cylindrical ends", limit_plans=plans)


def _b_square() -> StratifiedSpace:
    iso1, iso2 = RealVector(1), RealVector(2)
    plans = {}
    strata = [Stratum("interior", 2, 0, Shape("product", (INTERVAL, INTERVAL)),
                      POINT, Trivial(), ("x1_dx1", "x2_dx2"), ())]
    for i in ("1", "2"):
        other = "2" if i == "1" else "1"
        for v in (Fraction(0), Fraction(1)):
            sid = f"f_x{i}_{v}"
            strata.append(Stratum(
                sid, 1, 1, POINT, INTERVAL, iso1,
                ("x1_dx1", "x2_dx2"), (f"x{i}_dx{i}",),
                groupoid_model="pair(face) x R"))
            plans[sid] = LimitPlan((("subst", f"x{i}", v),),
                                   orbit_coords=(f"x{other}",))
    for v1 in (Fraction(0), Fraction(1)):
        for v2 in (Fraction(0), Fraction(1)):
            sid = f"c_{v1}{v2}"
            strata.append(Stratum(
                sid, 0, 2, POINT, POINT, iso2,
                ("x1_dx1", "x2_dx2"), ("x1_dx1", "x2_dx2"),
                groupoid_model="point x R^2"))
            plans[sid] = LimitPlan(
                (("subst", "x1", v1), ("subst", "x2", v2)),
                alt_steps=(("subst", "x2", v2), ("subst", "x1", v1)))
    return StratifiedSpace(
        "b", 2, tuple(strata),
        coords=(Coord("x1", "bdf2"), Coord("x2", "bdf2")),
        gens=(GenSpec("x1_dx1", "xi1", "x1", "x1*(1 - x1)"),
              GenSpec("x2_dx2", "xi2", "x2", "x2*(1 - x2)")),
        bdf_names=("x1", "1 - x1", "x2", "1 - x2"),
        label="square, cylindrical ends and corners", limit_plans=plans)


def _b_cylinder() -> StratifiedSpace:
    strata = (
        Stratum("interior", 2, 0, Shape("product", (INTERVAL, CIRCLE)),
                POINT, Trivial(), ("x_dx", "dth"), ()),
        Stratum("x0", 1, 1, POINT, CIRCLE, RealVector(1),
                ("x_dx", "dth"), ("x_dx",), groupoid_model="pair(circle) x R"),
        Stratum("x1", 1, 1, POINT, CIRCLE, RealVector(1),
                ("x_dx", "dth"), ("x_dx",), groupoid_model="pair(circle) x R"),
    )
    plans = {
        "x0": LimitPlan((("subst", "x", Fraction(0)),), orbit_coords=("th",)),
        "x1": LimitPlan((("subst", "x", Fraction(1)),), orbit_coords=("th",)),
    }
    return StratifiedSpace(
        "b", 2, strata,
        coords=(Coord("x", "bdf2"), Coord("th", "angle")),
        gens=(GenSpec("x_dx", "xi", "x", "x*(1 - x)"),
              GenSpec("dth", "tau", "th", "1")),
        bdf_names=("x", "1 - x"),
        label="cylinder, cylindrical ends", limit_plans=plans)


def _b_collar(cross_section: Shape) -> StratifiedSpace:
    if cross_section == POINT:
        strata = (
            Stratum("interior", 1, 0, INTERVAL, POINT, Trivial(), ("x_dx",), ()),
            Stratum("bdry", 0, 1, POINT, POINT, RealVector(1),
                    ("x_dx",), ("x_dx",), groupoid_model="point x R"),
        )
        plans = {"bdry": LimitPlan((("subst", "x", Fraction(0)),))}
        return StratifiedSpace(
            "b", 1, strata, coords=(Coord("x", "bdf1"),),
            gens=(GenSpec("x_dx", "xi", "x", "x"),),
            bdf_names=("x",),
            label="half-line collar, cylindrical end", limit_plans=plans)
    strata = (
        Stratum("interior", 2, 0, Shape("product", (INTERVAL, CIRCLE)),
                POINT, Trivial(), ("x_dx", "dy"), ()),
        Stratum("bdry", 1, 1, POINT, CIRCLE, RealVector(1),
                ("x_dx", "dy"), ("x_dx",), groupoid_model="pair(circle) x R"),
    )
    plans = {"bdry": LimitPlan((("subst", "x", Fraction(0)),),
                               orbit_coords=("y",))}
    return StratifiedSpace(
        "b", 2, strata,
        coords=(Coord("x", "bdf1"), Coord("y", "angle")),
        gens=(GenSpec("x_dx", "xi", "x", "x"),
              GenSpec("dy", "eta", "y", "1")),
        bdf_names=("x",),
        label="circle collar, cylindrical end", limit_plans=plans)


def build_edge_space(base: str = "circle", fiber: str = "circle") -> StratifiedSpace:
    """Edge structure on a collar over a fibered boundary ``fiber -> bdry -> base``.

    Degenerate bases are normalized: a point base yields the cylindrical
    (b-type) collar over the fiber, and ``fiber="point"`` (the boundary
    fibered over itself) yields the hyperbolic-type structure.
    """
    if base == "point":
        return build_b_space("circle_end" if fiber == "circle" else "point_end")
    if base != "circle":
        raise GeometryError("supported edge bases: point, circle")
    if fiber == "point":
        return build_ah_space("circle")
    if fiber != "circle":
        raise GeometryError("supported edge fibers: point, circle")
    bdry = fibered_pullback(SemidirectRnRplus(1), CIRCLE,
                            product_shape(CIRCLE, CIRCLE), id="bdry")
    bdry = replace(bdry, depth=1,
                   frame_valid=("x_dx", "dy", "x_dz"),
                   frame_vanishing=("x_dx", "x_dz"),
                   groupoid_model="fibered pair x (R x| R+*)")
    strata = (
        Stratum("interior", 3, 0,
                Shape("product", (INTERVAL, CIRCLE, CIRCLE)), POINT,
                Trivial(), ("x_dx", "dy", "x_dz"), ()),
        bdry,
    )
    plans = {"bdry": LimitPlan((("subst", "x", Fraction(0)),),
                               orbit_coords=("y",), base_coords=("z",))}
    return StratifiedSpace(
        "edge", 3, strata,
        coords=(Coord("x", "bdf1"), Coord("y", "angle"), Coord("z", "angle")),
        gens=(GenSpec("x_dx", "xi", "x", "x"),
              GenSpec("dy", "eta", "y", "1"),
              GenSpec("x_dz", "zeta", "z", "x")),
        bdf_names=("x",),
        label="edge collar, torus boundary fibered over a circle",
        limit_plans=plans)


def build_ah_space(boundary: str = "circle") -> StratifiedSpace:
    """Hyperbolic-type collar: every frame field degenerates at the boundary
    and each boundary point carries the solvable group T(bdry) x| R_+^*."""
    if boundary == "point":
        return build_b_space("point_end")
    if boundary != "circle":
        raise GeometryError("supported boundaries: point, circle")
    strata = (
        Stratum("interior", 2, 0, Shape("product", (INTERVAL, CIRCLE)),
                POINT, Trivial(), ("x_dx", "x_dz"), ()),
        Stratum("bdry", 1, 1, CIRCLE, POINT, SemidirectRnRplus(1),
                ("x_dx", "x_dz"), ("x_dx", "x_dz"),
                groupoid_model="circle x (R x| R+*)"),
    )
    plans = {"bdry": LimitPlan((("subst", "x", Fraction(0)),),
                               base_coords=("z",))}
    return StratifiedSpace(
        "ah", 2, strata,
        coords=(Coord("x", "bdf1"), Coord("z", "angle")),
        gens=(GenSpec("x_dx", "xi", "x", "x"),
              GenSpec("x_dz", "zeta", "z", "x")),
        bdf_names=("x",),
        label="hyperbolic-type collar, circle boundary", limit_plans=plans)


def transformation_space(n: int) -> StratifiedSpace:
    """Translation groupoid of R^n acting on its radial compactification.

    Structurally identical to the scattering space: the boundary orbits are
    points and the isotropy at infinity is the full translation group.
    """
    sc = build_scattering_space(n)
    return replace(sc, geometry_class="transformation",
                   label=f"R^{n} translation groupoid on its compactification")


# ---------------------------------------------------------------------------
# Fibered pullback constructor
# ---------------------------------------------------------------------------

def fibered_pullback(group: IsotropyGroup, base: Shape, total: Shape,
                     id: str = "pullback") -> Stratum:
    """Stratum descriptor for a group bundle pulled back along a submersion
    ``f: S -> B``: orbits are the fibers of f, the orbit space is B, and the
    isotropy is the structure group.  Rejects dimension data for which f
    cannot be a submersion."""
    fiber = _quotient_shape(total, base)
    if fiber is None:
        raise GeometryError(
            f"no submersion {total.describe()} -> {base.describe()}")
    return Stratum(id, total.dim, 1, base, fiber, group)


def _quotient_shape(total: Shape, base: Shape) -> Optional[Shape]:
    if base == POINT:
        return total
    if total == base:
        return POINT
    if total.kind == "product":
        remaining = list(total.factors)
        base_factors = list(base.factors) if base.kind == "product" else [base]
        for bf in base_factors:
            if bf in remaining:
                remaining.remove(bf)
            else:
                return None
        return product_shape(*remaining)
    return None


# ---------------------------------------------------------------------------
# Fredholm-groupoid predicate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateResult:
    holds: bool
    failing_strata: tuple[str, ...] = ()
    detail: str = ""

    def __bool__(self) -> bool:
        return self.holds


def is_fredholm_groupoid(space: StratifiedSpace) -> PredicateResult:
    """Check the two hypotheses the limit-operator criterion rests on:
    the interior is a dense pair-groupoid stratum, and every boundary
    stratum has amenable isotropy."""
    if not space.strata or space.interior.depth != 0 \
            or space.interior.isotropy.kind != "trivial":
        return PredicateResult(False, (space.strata[0].id if space.strata else "",),
                               "no dense pair-groupoid interior stratum")
    bad = tuple(s.id for s in space.boundary_strata if not s.isotropy.amenable)
    if bad:
        return PredicateResult(False, bad,
                               "non-amenable isotropy on: " + ", ".join(bad))
    return PredicateResult(True)


def retag_isotropy(space: StratifiedSpace, stratum_id: str, name: str,
                   amenable: bool) -> StratifiedSpace:
    """Replace a stratum's isotropy by an opaque tagged group (same
    dimension), e.g. to model a hypothesis failing."""
    old = space.stratum(stratum_id)
    new = replace(old, isotropy=Tagged(name, amenable, dim=old.isotropy.dim))
    strata = tuple(new if s.id == stratum_id else s for s in space.strata)
    return replace(space, strata=strata, limit_plans=space.limit_plans)


# ---------------------------------------------------------------------------
# Blow-ups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCenter:
    id: str


@dataclass(frozen=True)
class CurveCenter:
    id: str
    endpoints: tuple[str, str]
    nonzero_tangent: bool = True
    transverse: bool = True
    tangent_labels: tuple[str, str] = ("", "")


def smooth_surface(label: str = "disk") -> StratifiedSpace:
    """A smooth compact surface patch with no boundary strata; the starting
    point for blow-up constructions."""
    return StratifiedSpace(
        "smooth", 2,
        (Stratum("interior", 2, 0, Shape("product", (INTERVAL, INTERVAL)),
                 POINT, Trivial()),),
        label=label)


def blowup(space: StratifiedSpace,
           center: Union[PointCenter, CurveCenter]) -> StratifiedSpace:
    """Replace the center by the unit sphere bundle of its normal bundle.

    A point center in the interior of a surface produces a circle hyperface
    whose edge data has point base, i.e. a cylindrical-type (b) hyperface
    with isotropy the normal scale action R_+^* = R in log coordinates.  A
    curve center transverse to the existing boundary produces a depth-2
    hyperface fibered over the curve with isotropy T(curve) x| R_+^*, and
    the previous boundary keeps its pair-groupoid-times-scale model.
    """
    if isinstance(center, PointCenter):
        return _blowup_point(space, center)
    if isinstance(center, CurveCenter):
        return _blowup_curve(space, center)
    raise GeometryError(f"unsupported center {center!r}")


def _blowup_point(space: StratifiedSpace, center: PointCenter) -> StratifiedSpace:
    if space.ambient_dim != 2:
        raise GeometryError("point blow-ups are supported on surfaces")
    for r in space.records:
        if r.center_id == center.id:
            raise GeometryError(
                f"center {center.id!r} was already blown up; it no longer "
                f"lies in the interior")
    new_id = f"S_{center.id}"
    new = Stratum(new_id, 1, 1, POINT, CIRCLE, RealVector(1),
                  ("x_dx", "dy"), ("x_dx",),
                  groupoid_model="pair(circle) x R+*")
    strata = tuple(space.strata) + (new,)
    strata = tuple(sorted(strata, key=lambda s: s.depth))
    record = BlowupRecord(center.id, "point", 0, new_id, 1,
                          "S = unit circle of the normal plane at the point")
    first = not any(r.center_kind == "point" for r in space.records)
    plans = dict(space.limit_plans)
    if first:
        coords = (Coord("x", "bdf1"), Coord("y", "angle"))
        gens = (GenSpec("x_dx", "xi", "x", "x"), GenSpec("dy", "eta", "y", "1"))
        plans[new_id] = LimitPlan((("subst", "x", Fraction(0)),),
                                  orbit_coords=("y",))
        bdfs = ("x",)
        # the operating chart is now the collar around the exceptional circle
        interior = replace(space.interior,
                           orbit_base=Shape("product", (INTERVAL, CIRCLE)),
                           frame_valid=("x_dx", "dy"))
        strata = (interior,) + tuple(s for s in strata if s.depth > 0)
    else:
        # several exceptional circles: keep the stratification but drop the
        # single-chart frame (operator analysis needs one modeled end)
        coords, gens, bdfs = (), (), ()
        plans = {}
        strata = tuple(replace(s, frame_valid=(), frame_vanishing=())
                       for s in strata)
    return StratifiedSpace(
        "b", 2, strata, coords=coords, gens=gens, bdf_names=bdfs,
        records=space.records + (record,),
        label=(space.label + f", blown up at {center.id}").lstrip(", "),
        limit_plans=plans)


def _blowup_curve(space: StratifiedSpace, center: CurveCenter) -> StratifiedSpace:
    if not center.nonzero_tangent:
        raise GeometryError(
            f"curve {center.id!r} must have nowhere-vanishing tangent")
    if not center.transverse:
        raise GeometryError(
            f"curve {center.id!r} must meet the boundary transversally")
    point_ids = {r.center_id for r in space.records if r.center_kind == "point"}
    hyperface_ids = {s.id for s in space.strata if s.depth == 1}
    for e in center.endpoints:
        ok = e in point_ids or e in hyperface_ids or f"S_{e}" in hyperface_ids
        if not ok:
            raise GeometryError(
                f"curve endpoint {e!r} is not in the blown-up point set / "
                f"boundary")
    for r in space.records:
        if r.center_kind == "curve":
            prev = _curve_of(space, r.center_id)
            shared = set(prev.endpoints) & set(center.endpoints)
            for p in shared:
                li = prev.tangent_labels[prev.endpoints.index(p)]
                lj = center.tangent_labels[center.endpoints.index(p)]
                if li == lj:
                    raise GeometryError(
                        f"curves {prev.id!r} and {center.id!r} arrive at "
                        f"{p!r} with the same tangent direction")
    deepest = max((s.depth for s in space.strata
                   if s.depth >= 1), default=0)
    if deepest == 0:
        raise GeometryError("a transverse curve blow-up needs existing "
                            "boundary to be transverse to")
    new_depth = 2
    new_id = f"S_{center.id}"
    new = Stratum(new_id, 1, new_depth, INTERVAL, TWO_POINTS,
                  SemidirectRnRplus(1),
                  groupoid_model="fibered pair x (T(curve) x| R+*)")
    strata = []
    for s in space.strata:
        if s.depth == 1:
            s = replace(s, groupoid_model="(U1\\U0)^2 x R+*",
                        frame_valid=(), frame_vanishing=())
        strata.append(s)
    strata.append(new)
    strata = tuple(sorted(strata, key=lambda s: s.depth))
    record = BlowupRecord(center.id, "curve", 1, new_id, new_depth,
                          "S = unit normal sphere bundle over the curve; "
                          f"tangents {center.tangent_labels!r}, "
                          f"endpoints {center.endpoints!r}")
    return StratifiedSpace(
        "b", 2, strata, coords=(), gens=(), bdf_names=(),
        records=space.records + (record, _curve_record(center)),
        label=(space.label + f", blown up along {center.id}").lstrip(", "),
        limit_plans={})


def _curve_record(center: CurveCenter) -> BlowupRecord:
    # stash the curve data so later blow-ups can check tangent clashes
    note = "|".join([center.endpoints[0], center.endpoints[1],
                     center.tangent_labels[0], center.tangent_labels[1]])
    return BlowupRecord(center.id, "curve_data", 1, "", 0, note)


def _curve_of(space: StratifiedSpace, curve_id: str) -> CurveCenter:
    for r in space.records:
        if r.center_kind == "curve_data" and r.center_id == curve_id:
            e0, e1, l0, l1 = r.note.split("|")
            return CurveCenter(curve_id, (e0, e1), tangent_labels=(l0, l1))
    raise GeometryError(f"no curve data for {curve_id!r}")


def desingularize_curve_system(points: Sequence[str],
                               curves: Sequence[CurveCenter]) -> StratifiedSpace:
    """Iterated blow-up of a one-dimensional stratified subset of a surface:
    all points first, then the lifted curves.

    Validates the usual admissibility conditions: curves have nowhere-zero
    tangents, endpoints belong to the point set, interiors are disjoint
    (distinct curves), and two curves reaching the same point arrive with
    distinct tangent directions.
    """
    if len(set(points)) != len(points):
        raise GeometryError("blown-up points must be distinct")
    space = smooth_surface()
    for p in points:
        space = blowup(space, PointCenter(p))
    seen = set()
    for c in curves:
        if c.id in seen:
            raise GeometryError(f"curve {c.id!r} listed twice (interiors "
                                f"must be disjoint)")
        seen.add(c.id)
        for e in c.endpoints:
            if e not in points:
                raise GeometryError(
                    f"curve {c.id!r} endpoint {e!r} is not in the point set")
        space = blowup(space, c)
    return space


# ---------------------------------------------------------------------------
# Structural comparison and boundary limits of coefficients
# ---------------------------------------------------------------------------

def structurally_equal(a: StratifiedSpace, b: StratifiedSpace) -> bool:
    """Same stratification and frame data up to labels and stratum names."""
    def strat_sig(s: Stratum):
        return (s.depth, s.dim, s.orbit_base, s.fiber, s.isotropy,
                len(s.frame_vanishing), len(s.frame_valid))

    def gen_sig(g: GenSpec):
        return (g.coord, g.action_coeff)

    return (a.geometry_class == b.geometry_class
            and a.ambient_dim == b.ambient_dim
            and sorted(map(strat_sig, a.strata)) == sorted(map(strat_sig, b.strata))
            and sorted(map(gen_sig, a.gens)) == sorted(map(gen_sig, b.gens)))


def boundary_limit_nf(nf: NF, space: StratifiedSpace, stratum_id: str) -> NF:
    """Freeze a coefficient at a boundary stratum.

    Applies the stratum's approach data (finite substitution into a boundary
    face, escape to infinity, or the radial limit toward a circle at
    infinity).  For corner strata both iterated orders are computed and must
    agree; a mismatch raises :class:`LimitError`."""
    plan = space.limit_plan(stratum_id)
    out = iterated_limit(nf, list(plan.steps))
    if plan.alt_steps is not None:
        other = iterated_limit(nf, list(plan.alt_steps))
        if out != other:
            raise LimitError(
                f"iterated limits at corner {stratum_id!r} disagree")
    return out


def boundary_limit(e: Expr, space: StratifiedSpace, stratum_id: str) -> Expr:
    """Expression-level wrapper around :func:`boundary_limit_nf`."""
    return nf_to_expr(boundary_limit_nf(nf_from_expr(e), space, stratum_id))
