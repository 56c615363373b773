"""Operator algebra: frames, normal ordering, composition, symbols."""

import numpy as np
import pytest

from fredholm_lab.calculus import (
    CalculusError,
    DiffOp,
    Frame,
    FrameGen,
    apply_scalar,
    compose,
    diffop,
    frame_for,
    is_elliptic,
    op_add,
    op_equal,
    op_scale,
    principal_symbol,
    random_diffop,
    symbol_equal,
    symbol_mul,
)
from fredholm_lab.expr import NF, nf_from_expr, parse_expr
from fredholm_lab.geometry import (
    build_ah_space,
    build_b_space,
    build_edge_space,
    build_scattering_space,
    smooth_surface,
)


def nf(src):
    return nf_from_expr(parse_expr(src))


# ---------------------------------------------------------------------------
# frames and brackets
# ---------------------------------------------------------------------------

def test_edge_frame_brackets():
    fr = frame_for(build_edge_space())
    assert [g.name for g in fr.gens] == ["x_dx", "dy", "x_dz"]
    i = fr.index
    assert fr.bracket(i["x_dx"], i["x_dz"]) == [(1, "x_dz")]
    assert fr.bracket(i["x_dz"], i["x_dx"]) == [(-1, "x_dz")]
    assert fr.bracket(i["x_dx"], i["dy"]) == []
    assert fr.bracket(i["dy"], i["x_dz"]) == []


def test_flat_frames_commute():
    for space in (build_scattering_space(2), build_b_space("square"),
                  build_b_space("cylinder")):
        fr = frame_for(space)
        n = len(fr.gens)
        for a in range(n):
            for b in range(n):
                assert fr.bracket(a, b) == []


def test_bracket_closure_rejected():
    # [d/dx, x^2 d/dx] = 2x d/dx is not a constant multiple of either field
    gens = [FrameGen("dx", "xi", (NF.const(1), "x")),
            FrameGen("x2dx", "eta", (nf("x^2"), "x"))]
    with pytest.raises(CalculusError):
        Frame(gens)


def test_frame_requires_generators():
    with pytest.raises(CalculusError):
        frame_for(smooth_surface())


# ---------------------------------------------------------------------------
# composition and normal form
# ---------------------------------------------------------------------------

def test_leibniz_through_coefficient():
    # (x d/dx) . f  =  f . (x d/dx) + (x df/dx)
    edge = build_edge_space()
    P = diffop(edge, [(1, ["x_dx"])])
    F = diffop(edge, [("x^2*sin(y)", [])])
    expected = diffop(edge, [("x^2*sin(y)", ["x_dx"]),
                             ("2*x^2*sin(y)", [])])
    assert op_equal(compose(P, F), expected)


def test_commutator_is_bracket():
    edge = build_edge_space()
    A = diffop(edge, [(1, ["x_dx"])])
    B = diffop(edge, [(1, ["x_dz"])])
    comm = op_add(compose(A, B), op_scale(compose(B, A), -1))
    assert op_equal(comm, B)


def test_normal_form_reorders_with_correction():
    edge = build_edge_space()
    P = diffop(edge, [(1, ["x_dz", "x_dx"])])
    direct = diffop(edge, [(1, ["x_dx", "x_dz"]), (-1, ["x_dz"])])
    assert op_equal(P, direct)
    assert set(P.terms()) == {("x_dx", "x_dz"), ("x_dz",)}


def test_apply_scalar():
    edge = build_edge_space()
    P = diffop(edge, [(1, ["x_dx", "x_dx"]), ("sin(y)", ["dy"])])
    f = nf("x^3")
    # (x d/dx)^2 x^3 = 9 x^3; the dy term sees no y dependence
    assert apply_scalar(P, f) == nf("9*x^3")
    g = nf("cos(y)")
    assert apply_scalar(P, g) == nf("-sin(y)^2")


def test_compose_order_bound():
    rng = np.random.default_rng(11242)
    edge = build_edge_space()
    for _ in range(25):
        P = random_diffop(edge, rng)
        Q = random_diffop(edge, rng)
        assert compose(P, Q).order <= P.order + Q.order


def test_compose_associative_random():
    rng = np.random.default_rng(914)
    for space in (build_edge_space(), build_b_space("square"),
                  build_scattering_space(1)):
        for _ in range(10):
            P = random_diffop(space, rng, max_order=2, max_terms=2)
            Q = random_diffop(space, rng, max_order=2, max_terms=2)
            R = random_diffop(space, rng, max_order=1, max_terms=2)
            assert op_equal(compose(compose(P, Q), R),
                            compose(P, compose(Q, R)))


def test_matrix_composition():
    sc = build_scattering_space(1)
    A = diffop(sc, {(1, 2): [(1, ["dt"])]}, shape=2)
    B = diffop(sc, {(2, 1): [("tanh(t)", [])]}, shape=2)
    C = compose(A, B)
    # (1,1) entry: dt . tanh(t) = tanh(t) dt + (1 - tanh(t)^2)
    assert C.entries[0][0][("dt",)] == nf("tanh(t)")
    assert C.entries[0][0][()] == nf("1 - tanh(t)^2")
    assert C.entries[1][1] == {}


# ---------------------------------------------------------------------------
# principal symbol
# ---------------------------------------------------------------------------

def test_symbol_of_laplacian():
    sq = build_b_space("square")
    P = diffop(sq, [(1, ["x1_dx1", "x1_dx1"]), (1, ["x2_dx2", "x2_dx2"]),
                    (5, ["x1_dx1"])])
    sym = principal_symbol(P)
    assert sym.order == 2
    assert sym.entries[0][0] == {(2, 0): NF.const(1), (0, 2): NF.const(1)}


def test_symbol_multiplicative_random():
    rng = np.random.default_rng(424243)
    edge = build_edge_space()
    checked = 0
    for _ in range(60):
        P = random_diffop(edge, rng, max_order=2, max_terms=2)
        Q = random_diffop(edge, rng, max_order=2, max_terms=2)
        prod = symbol_mul(principal_symbol(P), principal_symbol(Q))
        PQ = compose(P, Q)
        if PQ.order < P.order + Q.order:
            # top-order cancellation: the naive product must vanish too
            assert not prod.entries[0][0]
            continue
        checked += 1
        assert symbol_equal(principal_symbol(PQ), prod)
    assert checked >= 20


# ---------------------------------------------------------------------------
# ellipticity
# ---------------------------------------------------------------------------

def test_schroedinger_is_elliptic():
    sc = build_scattering_space(1)
    P = diffop(sc, [(-1, ["dt", "dt"]), ("2 + tanh(t)", [])])
    rep = is_elliptic(P)
    assert rep.elliptic
    assert rep.status == "NumericallyCertified"
    assert rep.ratio > 1e-10


def test_b_laplacian_is_elliptic():
    sq = build_b_space("square")
    P = diffop(sq, [(1, ["x1_dx1", "x1_dx1"]), (1, ["x2_dx2", "x2_dx2"])])
    assert is_elliptic(P)


def test_lightcone_not_elliptic_with_sharp_witness():
    sc2 = build_scattering_space(2)
    P = diffop(sc2, [(1, ["dt1", "dt1"]), (-1, ["dt2", "dt2"])])
    rep = is_elliptic(P)
    assert not rep.elliptic
    w = rep.witness
    assert w is not None
    xi = np.array(w["xi"])
    assert abs(np.linalg.norm(xi) - 1.0) < 1e-9
    # the polished direction annihilates the symbol to machine precision
    assert abs(xi[0] ** 2 - xi[1] ** 2) <= 1e-12
    assert abs(abs(xi[0]) - np.sqrt(0.5)) < 1e-6


def test_ellipticity_scale_invariant():
    sc = build_scattering_space(1)
    P = diffop(sc, [(-1, ["dt", "dt"]), ("2 + tanh(t)", [])])
    small = op_scale(P, nf("1/100000000"))
    r1, r2 = is_elliptic(P), is_elliptic(small)
    assert r1.elliptic and r2.elliptic
    assert r1.ratio == pytest.approx(r2.ratio, rel=1e-9)


def test_degenerating_coefficient_fails_at_boundary():
    # x . (x d/dx)^2 is elliptic at every interior point but its frozen
    # leading coefficient vanishes on the x -> 0 face
    bi = build_b_space("interval")
    P = diffop(bi, [("x", ["x_dx", "x_dx"])])
    rep = is_elliptic(P)
    assert not rep.elliptic
    assert rep.witness["stratum"] == "x0"


def test_order_zero_ellipticity_with_shift():
    sc = build_scattering_space(1)
    P = diffop(sc, [("tanh(t)", [])])
    assert not is_elliptic(P)          # tanh vanishes at t = 0
    assert is_elliptic(P, shift=2.0)   # |tanh - 2| >= 1 everywhere
    assert not is_elliptic(P, shift=1.0)  # limit value at t -> +inf
