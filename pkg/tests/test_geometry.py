"""Stratified-space descriptors: builders, predicate, blow-ups, limits glue."""

from fractions import Fraction

import pytest

from fredholm_lab.expr import LimitError, nf_from_expr, parse_expr, print_expr
from fredholm_lab.geometry import (
    CIRCLE,
    CurveCenter,
    GeometryError,
    INTERVAL,
    POINT,
    PointCenter,
    RealVector,
    SemidirectRnRplus,
    Shape,
    Tagged,
    Trivial,
    blowup,
    boundary_limit,
    boundary_limit_nf,
    build_ah_space,
    build_b_space,
    build_edge_space,
    build_scattering_space,
    desingularize_curve_system,
    fibered_pullback,
    is_fredholm_groupoid,
    product_shape,
    retag_isotropy,
    smooth_surface,
    structurally_equal,
    transformation_space,
)


def nf(text):
    return nf_from_expr(parse_expr(text))


# ---------------------------------------------------------------------------
# isotropy groups
# ---------------------------------------------------------------------------

def test_isotropy_dims_and_amenability():
    assert Trivial().dim == 0
    assert RealVector(2).dim == 2
    assert SemidirectRnRplus(1).dim == 2
    assert SemidirectRnRplus(1).amenable  # solvable
    assert not SemidirectRnRplus(1).abelian
    assert RealVector(2).abelian
    assert not Tagged("F2", amenable=False, dim=1).amenable


def test_rplus_normalizes_to_vector_group():
    assert SemidirectRnRplus(0) == RealVector(1)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def test_scattering_line():
    sp = build_scattering_space(1)
    assert sp.ambient_dim == 1
    ids = [s.id for s in sp.boundary_strata]
    assert ids == ["tminus", "tplus"]
    for s in sp.boundary_strata:
        assert s.isotropy == RealVector(1)
        assert s.orbit_base == POINT and s.fiber == POINT
        assert s.frame_vanishing == ("dt",)


def test_scattering_plane():
    sp = build_scattering_space(2)
    (s,) = sp.boundary_strata
    assert s.orbit_base == CIRCLE and s.fiber == POINT
    assert s.isotropy == RealVector(2)
    assert set(s.frame_vanishing) == {"dt1", "dt2"}


def test_b_interval_strata():
    sp = build_b_space("interval")
    assert [s.id for s in sp.strata] == ["interior", "x0", "x1"]
    for s in sp.boundary_strata:
        assert s.isotropy == RealVector(1)
        assert s.frame_vanishing == ("x_dx",)


def test_b_square_counts_and_corners():
    sp = build_b_space("square")
    assert sp.depth == 2
    faces = [s for s in sp.strata if s.depth == 1]
    corners = [s for s in sp.strata if s.depth == 2]
    assert len(faces) == 4 and len(corners) == 4
    for s in faces:
        assert s.fiber == INTERVAL and s.isotropy == RealVector(1)
    for s in corners:
        assert s.isotropy == RealVector(2)
        assert len(s.frame_vanishing) == 2


def test_b_cylinder():
    sp = build_b_space("cylinder")
    assert [s.id for s in sp.boundary_strata] == ["x0", "x1"]
    for s in sp.boundary_strata:
        assert s.fiber == CIRCLE
        assert s.isotropy == RealVector(1)


def test_b_rejects_deep_corners():
    with pytest.raises(GeometryError):
        build_b_space(["interval", "interval", "interval"])
    with pytest.raises(GeometryError):
        build_b_space(["circle"])


def test_edge_space_frame_split():
    sp = build_edge_space(base="circle", fiber="circle")
    (s,) = sp.boundary_strata
    assert s.isotropy == SemidirectRnRplus(1)
    assert set(s.frame_vanishing) == {"x_dx", "x_dz"}
    assert set(s.frame_valid) - set(s.frame_vanishing) == {"dy"}
    assert s.orbit_base == CIRCLE and s.fiber == CIRCLE


def test_ah_space_all_fields_vanish():
    sp = build_ah_space("circle")
    (s,) = sp.boundary_strata
    assert s.isotropy == SemidirectRnRplus(1)
    assert set(s.frame_vanishing) == {"x_dx", "x_dz"}
    assert s.orbit_base == CIRCLE and s.fiber == POINT


def test_vanishing_generator_count_matches_isotropy_dim():
    for sp in (build_scattering_space(1), build_scattering_space(2),
               build_b_space("interval"), build_b_space("square"),
               build_b_space("cylinder"), build_edge_space(),
               build_ah_space("circle")):
        for s in sp.boundary_strata:
            assert len(s.frame_vanishing) == s.isotropy.dim


# ---------------------------------------------------------------------------
# degeneration laws
# ---------------------------------------------------------------------------

def test_edge_point_base_degenerates_to_b():
    a = build_edge_space(base="point", fiber="circle")
    b = build_b_space("circle_end")
    assert structurally_equal(a, b)
    assert a.geometry_class == "b"


def test_edge_full_base_degenerates_to_ah():
    a = build_edge_space(base="circle", fiber="point")
    b = build_ah_space("circle")
    assert structurally_equal(a, b)
    assert a.geometry_class == "ah"


def test_transformation_space_mirrors_scattering():
    a = transformation_space(1)
    assert a.geometry_class == "transformation"
    assert [s.isotropy for s in a.boundary_strata] == [RealVector(1),
                                                       RealVector(1)]
    assert structurally_equal(a, a)


# ---------------------------------------------------------------------------
# fibered pullback
# ---------------------------------------------------------------------------

def test_fibered_pullback_examples():
    s = fibered_pullback(RealVector(1), POINT, CIRCLE)
    assert s.orbit_base == POINT and s.fiber == CIRCLE
    assert s.isotropy == RealVector(1)

    s = fibered_pullback(Trivial(), CIRCLE, CIRCLE)
    assert s.fiber == POINT and s.isotropy == Trivial()

    s = fibered_pullback(RealVector(2), POINT, POINT)
    assert s.isotropy == RealVector(2) and s.dim == 0


def test_fibered_pullback_rejects_non_submersion():
    with pytest.raises(GeometryError):
        fibered_pullback(Trivial(), product_shape(CIRCLE, CIRCLE), CIRCLE)


# ---------------------------------------------------------------------------
# predicate and retagging
# ---------------------------------------------------------------------------

def test_predicate_holds_on_builtin_spaces():
    for sp in (build_scattering_space(2), build_b_space("square"),
               build_edge_space(), build_ah_space("circle")):
        assert is_fredholm_groupoid(sp)


def test_predicate_fails_after_retag():
    sp = build_scattering_space(1)
    bad = retag_isotropy(sp, "tplus", "F2", amenable=False)
    res = is_fredholm_groupoid(bad)
    assert not res
    assert res.failing_strata == ("tplus",)
    # retag preserves isotropy dimension, so stratum invariants still hold
    assert bad.stratum("tplus").isotropy.dim == 1


def test_predicate_monotone_under_retag():
    # flipping any one stratum non-amenable flips the predicate
    sp = build_b_space("square")
    assert is_fredholm_groupoid(sp)
    for s in sp.boundary_strata:
        bad = retag_isotropy(sp, s.id, "bad", amenable=False)
        assert not is_fredholm_groupoid(bad)


# ---------------------------------------------------------------------------
# blow-ups
# ---------------------------------------------------------------------------

def test_point_blowup_of_surface():
    sp = blowup(smooth_surface(), PointCenter("p"))
    (s,) = sp.boundary_strata
    assert s.fiber == CIRCLE and s.orbit_base == POINT
    assert s.isotropy == RealVector(1)  # R_+^* in log coordinates
    assert sp.records[-1].new_hyperface == "S_p"
    assert sp.records[-1].new_depth == 1
    # b-type hyperface: structurally the circle-collar cylindrical end
    assert structurally_equal(sp, build_b_space("circle_end"))


def test_blowup_same_point_twice_rejected():
    sp = blowup(smooth_surface(), PointCenter("p"))
    with pytest.raises(GeometryError) as exc:
        blowup(sp, PointCenter("p"))
    assert "no longer" in str(exc.value)


def test_transverse_curve_blowup_filtration():
    sp = blowup(smooth_surface(), PointCenter("p"))
    sp = blowup(sp, CurveCenter("c", ("p", "p"), tangent_labels=("in", "out")))
    # three-set filtration U0 in U1 in U2
    filt = sp.filtration()
    assert len(filt) == 3
    assert filt[0] == ("interior",)
    old = sp.stratum("S_p")
    assert old.groupoid_model == "(U1\\U0)^2 x R+*"
    new = sp.stratum("S_c")
    assert new.depth == 2
    assert new.isotropy == SemidirectRnRplus(1)
    assert new.orbit_base == INTERVAL


def test_depth_increment_rule():
    # new hyperface depth = 1 + depth of the deepest stratum the center meets
    sp = blowup(smooth_surface(), PointCenter("p"))
    assert sp.records[-1].new_depth == 1  # interior center
    sp2 = blowup(sp, CurveCenter("c", ("p", "p"), tangent_labels=("a", "b")))
    assert sp2.records[-2].new_depth == 2  # meets the depth-1 circle


def test_curve_blowup_validations():
    sp = blowup(smooth_surface(), PointCenter("p"))
    with pytest.raises(GeometryError):
        blowup(sp, CurveCenter("c", ("p", "q"), tangent_labels=("a", "b")))
    with pytest.raises(GeometryError):
        blowup(sp, CurveCenter("c", ("p", "p"), nonzero_tangent=False))
    with pytest.raises(GeometryError):
        blowup(sp, CurveCenter("c", ("p", "p"), transverse=False))


def test_desingularize_curve_system():
    sp = desingularize_curve_system(
        ["p", "q"],
        [CurveCenter("c1", ("p", "q"), tangent_labels=("e", "w")),
         CurveCenter("c2", ("p", "q"), tangent_labels=("n", "s"))])
    assert sp.depth == 2
    curve_faces = [s for s in sp.strata if s.depth == 2]
    assert len(curve_faces) == 2
    for s in curve_faces:
        assert s.isotropy == SemidirectRnRplus(1)


def test_desingularize_rejects_tangent_clash():
    with pytest.raises(GeometryError) as exc:
        desingularize_curve_system(
            ["p"],
            [CurveCenter("c1", ("p", "p"), tangent_labels=("n", "s")),
             CurveCenter("c2", ("p", "p"), tangent_labels=("n", "w"))])
    assert "tangent" in str(exc.value)


def test_desingularize_rejects_stray_endpoint():
    with pytest.raises(GeometryError):
        desingularize_curve_system(
            ["p"], [CurveCenter("c1", ("p", "z"), tangent_labels=("a", "b"))])


# ---------------------------------------------------------------------------
# boundary limits through stratum plans
# ---------------------------------------------------------------------------

def test_boundary_limit_scattering():
    sp = build_scattering_space(1)
    assert boundary_limit_nf(nf("2 + tanh(t)"), sp, "tplus") == nf("3")
    assert boundary_limit_nf(nf("2 + tanh(t)"), sp, "tminus") == nf("1")


def test_boundary_limit_face_keeps_orbit_coordinate():
    sp = build_b_space("square")
    got = boundary_limit_nf(nf("x1^2*sin(x2) + 3"), sp, "f_x1_0")
    assert got == nf("3")
    got = boundary_limit_nf(nf("(2 + x1)*x2"), sp, "f_x1_0")
    assert got == nf("2*x2")


def test_boundary_limit_corner_agreement():
    sp = build_b_space("square")
    got = boundary_limit_nf(nf("x1 + 2*x2 + x1*x2"), sp, "c_01")
    assert got == nf("2")


def test_boundary_limit_corner_pole_rejected():
    sp = build_b_space("square")
    with pytest.raises(LimitError):
        boundary_limit_nf(nf("1/(x1 + x2)"), sp, "c_00")


def test_boundary_limit_expr_wrapper():
    sp = build_b_space("square")
    e = boundary_limit(parse_expr("x1^2*sin(x2) + 3"), sp, "f_x1_0")
    assert print_expr(e) == "3"


def test_limit_plan_only_for_boundary():
    sp = build_b_space("interval")
    with pytest.raises(GeometryError):
        sp.limit_plan("interior")
