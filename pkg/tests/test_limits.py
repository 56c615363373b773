"""Ghost generators and limit-operator extraction."""

from fractions import Fraction

import numpy as np
import pytest

from fredholm_lab.calculus import (
    compose,
    diffop,
    op_equal,
    principal_symbol,
    random_diffop,
    symbol_equal,
)
from fredholm_lab.expr import NF, nf_from_expr, parse_expr
from fredholm_lab.geometry import (
    blowup,
    build_ah_space,
    build_b_space,
    build_edge_space,
    build_scattering_space,
    desingularize_curve_system,
    smooth_surface,
    CurveCenter,
    PointCenter,
)
from fredholm_lab.limits import (
    LimitsError,
    all_limit_operators,
    ghost_split,
    ghost_weight,
    limit_operator,
)


def nf(src):
    return nf_from_expr(parse_expr(src))


# ---------------------------------------------------------------------------
# classification of frame fields at strata
# ---------------------------------------------------------------------------

def test_ghost_split_by_class():
    sc1 = build_scattering_space(1)
    assert ghost_split(sc1, "tplus") == (("dt",), ())

    sc2 = build_scattering_space(2)
    assert ghost_split(sc2, "circle_inf") == (("dt1", "dt2"), ())

    edge = build_edge_space()
    assert ghost_split(edge, "bdry") == (("x_dx", "x_dz"), ("dy",))

    sq = build_b_space("square")
    assert ghost_split(sq, "f_x1_0") == (("x1_dx1",), ("x2_dx2",))
    assert ghost_split(sq, "c_01") == (("x1_dx1", "x2_dx2"), ())

    ah = build_ah_space()
    assert ghost_split(ah, "bdry") == (("x_dx", "x_dz"), ())

    cyl = build_b_space("cylinder")
    assert ghost_split(cyl, "x0") == (("x_dx",), ("dth",))


def test_ghost_weights():
    bi = build_b_space("interval")
    assert ghost_weight(bi, "x0", "x_dx") == Fraction(1)
    assert ghost_weight(bi, "x1", "x_dx") == Fraction(-1)

    sc1 = build_scattering_space(1)
    assert ghost_weight(sc1, "tminus", "dt") == Fraction(1)

    edge = build_edge_space()
    assert ghost_weight(edge, "bdry", "x_dx") == Fraction(1)
    assert ghost_weight(edge, "bdry", "x_dz") == Fraction(1)


def test_interior_has_no_limit():
    sc1 = build_scattering_space(1)
    P = diffop(sc1, [(1, ["dt"])])
    with pytest.raises(LimitsError):
        limit_operator(P, "interior")


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def test_schroedinger_limits():
    sc1 = build_scattering_space(1)
    P = diffop(sc1, [(-1, ["dt", "dt"]), ("2 + tanh(t)", [])])
    ops = all_limit_operators(P)
    assert [L.stratum_id for L in ops] == ["tminus", "tplus"]
    lo, hi = ops
    assert lo.op.terms() == {("dt", "dt"): NF.const(-1), (): NF.const(1)}
    assert hi.op.terms() == {("dt", "dt"): NF.const(-1), (): NF.const(3)}
    assert [g.name for g in lo.ghosts] == ["dt"]
    assert not lo.is_family()
    assert lo.carrier == "point x R^1"


def test_indicial_limits_agree_at_both_ends():
    bi = build_b_space("interval")
    P = diffop(bi, [(1, ["x_dx", "x_dx"])])
    a, b = all_limit_operators(P)
    assert op_equal(a.op, b.op)
    assert a.op.terms() == {("x_dx", "x_dx"): NF.const(1)}


def test_coefficients_freeze_on_faces():
    sq = build_b_space("square")
    P = diffop(sq, [("2 + x1", ["x2_dx2", "x2_dx2"]), ("x1*x2", ["x1_dx1"])])
    L = limit_operator(P, "f_x1_0")
    assert L.op.terms() == {("x2_dx2", "x2_dx2"): NF.const(2)}
    C = limit_operator(P, "c_11")
    assert C.op.terms() == {("x2_dx2", "x2_dx2"): NF.const(3),
                            ("x1_dx1",): NF.const(1)}


def test_vanishing_leading_coefficient_drops_out():
    bi = build_b_space("interval")
    P = diffop(bi, [("x", ["x_dx", "x_dx"]), (1, [])])
    L = limit_operator(P, "x0")
    assert L.op.terms() == {(): NF.const(1)}
    assert L.op.order == 0
    Z = limit_operator(diffop(bi, [("x", ["x_dx"])]), "x0")
    assert Z.is_zero()


def test_edge_family_and_ghost_passthrough():
    edge = build_edge_space()
    P = diffop(edge, [(1, ["x_dz"])])
    F = diffop(edge, [("sin(z)", [])])
    upstairs = compose(P, F)
    # downstairs the ghost x_dz slides through the frozen coefficient
    L = limit_operator(upstairs, "bdry")
    assert L.op.terms() == {("x_dz",): nf("sin(z)")}
    assert op_equal(L.op, compose(limit_operator(P, "bdry").op,
                                  limit_operator(F, "bdry").op))
    assert L.is_family() and L.base_coords == ("z",)
    Q = diffop(edge, [(1, ["x_dx", "x_dx"]), ("sin(y)", ["dy"])])
    assert not limit_operator(Q, "bdry").is_family()


def test_radial_freeze_and_rejection():
    sc2 = build_scattering_space(2)
    P = diffop(sc2, [(1, ["dt1", "dt1"]), (1, ["dt2", "dt2"]),
                     ("t1^2/(1 + t1^2 + t2^2)", [])])
    L = limit_operator(P, "circle_inf")
    assert L.op.terms()[()] == nf("cos(th)^2")
    assert L.base_coords == ("th",)
    bad = diffop(sc2, [(1, ["dt1", "dt1"]), ("tanh(t1)", [])])
    with pytest.raises(LimitsError):
        limit_operator(bad, "circle_inf")


def test_blowup_collar_limit():
    surf = blowup(smooth_surface(), PointCenter("p"))
    P = diffop(surf, [(1, ["x_dx", "x_dx"]), (-1, ["dy", "dy"])])
    L = limit_operator(P, "S_p")
    assert [g.name for g in L.ghosts] == ["x_dx"]
    assert L.orbit_coords == ("y",)
    assert L.op.terms() == {("x_dx", "x_dx"): NF.const(1),
                            ("dy", "dy"): NF.const(-1)}


def test_geometry_only_strata_are_refused():
    space = desingularize_curve_system(
        ["p", "q"], [CurveCenter("c", ("p", "q"), tangent_labels=("la", "lb"))])
    s = [st for st in space.boundary_strata if st.id == "S_c"][0]
    assert not s.frame_valid and not s.frame_vanishing
    with pytest.raises(LimitsError):
        ghost_split(space, "S_c")


# ---------------------------------------------------------------------------
# structural properties
# ---------------------------------------------------------------------------

def _spaces_for_homomorphism():
    return [build_scattering_space(1), build_b_space("interval"),
            build_b_space("square"), build_b_space("cylinder"),
            build_edge_space(), build_ah_space()]


def test_extraction_is_multiplicative():
    rng = np.random.default_rng(52918)
    for space in _spaces_for_homomorphism():
        for _ in range(8):
            P = random_diffop(space, rng, max_order=2, max_terms=2)
            Q = random_diffop(space, rng, max_order=2, max_terms=2)
            PQ = compose(P, Q)
            for s in space.boundary_strata:
                lhs = limit_operator(PQ, s.id).op
                rhs = compose(limit_operator(P, s.id).op,
                              limit_operator(Q, s.id).op)
                assert op_equal(lhs, rhs), (space.label, s.id)


def test_extraction_respects_symbol():
    sc1 = build_scattering_space(1)
    P = diffop(sc1, [("-1 - exp(-(t^2))", ["dt", "dt"]), ("2 + tanh(t)", [])])
    L = limit_operator(P, "tplus")
    # no order drop here: the limit's top symbol is the frozen top symbol
    assert principal_symbol(L.op).entries[0][0] == {(2,): NF.const(-1)}
    assert symbol_equal(principal_symbol(L.op),
                        principal_symbol(limit_operator(P, "tplus").op))


def test_describe_mentions_ghosts():
    edge = build_edge_space()
    P = diffop(edge, [(1, ["x_dx", "x_dx"]), ("2 + x", ["dy", "dy"])])
    text = limit_operator(P, "bdry").describe()
    assert "ghost generators: x_dx (weight 1), x_dz (weight 1)" in text
    assert 'coeff "2" gens [dy, dy]' in text
