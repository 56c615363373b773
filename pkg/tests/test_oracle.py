"""Interior-truncation oracle: discretization quality, trend
classification, eigenvalue persistence, and the cross-check against the
limit-operator route."""

import numpy as np
import pytest

from fredholm_lab.calculus import apply_scalar, diffop
from fredholm_lab.expr import nf_from_expr, parse_expr
from fredholm_lab.geometry import (
    build_ah_space,
    build_b_space,
    build_scattering_space,
)
from fredholm_lab.oracle import (
    OracleError,
    conditioning_trend,
    cross_validate,
    ess_spectrum_oracle,
    interior_matrix,
)


def schrodinger():
    sp = build_scattering_space(1)
    return diffop(sp, [("-1", ["dt", "dt"]), ("2 + tanh(t)", [])])


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

def test_interior_matrix_is_hermitian_for_symmetric_operator():
    A, axes = interior_matrix(schrodinger(), level=1)
    assert abs(A - A.conj().T).max() <= 1e-9 * abs(A).max()
    ev = np.linalg.eigvalsh(A.toarray())
    # lowest box level sits just above the left-channel threshold
    assert abs(ev[0] - 1.011) < 5e-3


def test_discretization_matches_symbolic_application():
    cyl = build_b_space("cylinder")
    p = diffop(cyl, [("sin(th)", ["x_dx", "dth"]), ("-1", ["x_dx", "x_dx"]),
                     ("x", ["dth"])])
    f = nf_from_expr(parse_expr("cos(th) * x * (1 - x)"))
    g = apply_scalar(p, f)

    A, axes = interior_matrix(p, level=1)
    mesh = np.meshgrid(*[a.x for a in axes], indexing="ij")
    env = {a.coord: m for a, m in zip(axes, mesh)}
    fv = np.asarray(f.evaluate(env), float)
    gv = np.asarray(g.evaluate(env), float)
    out = (A @ fv.ravel().astype(complex)).reshape(fv.shape)
    err = np.abs(out.real - gv)[3:-3, :].max()
    assert err < 2.5e-3


def test_discretization_is_second_order():
    cyl = build_b_space("cylinder")
    p = diffop(cyl, [("sin(th)", ["x_dx", "dth"]), ("-1", ["x_dx", "x_dx"]),
                     ("x", ["dth"])])
    f = nf_from_expr(parse_expr("cos(th) * x * (1 - x)"))
    g = apply_scalar(p, f)

    errs = []
    for scale in (1.0, 2.0):
        A, axes = interior_matrix(p, level=1, points_scale=scale)
        mesh = np.meshgrid(*[a.x for a in axes], indexing="ij")
        env = {a.coord: m for a, m in zip(axes, mesh)}
        fv = np.asarray(f.evaluate(env), float)
        gv = np.asarray(g.evaluate(env), float)
        out = (A @ fv.ravel().astype(complex)).reshape(fv.shape)
        errs.append(np.abs(out.real - gv)[3:-3, :].max())
    ratio = errs[0] / errs[1]
    assert 3.0 < ratio < 5.5


def test_periodic_closure_changes_the_matrix():
    p = schrodinger()
    A, _ = interior_matrix(p, level=0, bc="dirichlet")
    B, _ = interior_matrix(p, level=0, bc="periodic")
    assert B.nnz > A.nnz          # the wrap-around entries
    assert abs(A - B).max() > 0


def test_unknown_boundary_condition_rejected():
    with pytest.raises(OracleError):
        interior_matrix(schrodinger(), bc="neumann")


# ---------------------------------------------------------------------------
# conditioning trends
# ---------------------------------------------------------------------------

def test_conditioning_stays_bounded_below_off_spectrum():
    tr = conditioning_trend(schrodinger(), lam=0.0, levels=(0, 1))
    assert tr.trend == "BoundedBelow"
    # distance from 0 to the essential spectrum is 1
    assert tr.sigmas[-1] > 0.5


def test_conditioning_decays_on_spectrum():
    tr = conditioning_trend(schrodinger(), lam=2.0, levels=(0, 1))
    assert tr.trend == "Decaying"


# ---------------------------------------------------------------------------
# eigenvalue persistence
# ---------------------------------------------------------------------------

def test_spectrum_two_channel_schrodinger():
    r = ess_spectrum_oracle(schrodinger(), window=(0.0, 8.0))
    assert r.status == "Approximate"
    assert len(r.intervals) == 1
    lo, hi = r.intervals[0]
    assert abs(lo - 1.0) <= 5e-2
    assert hi >= 7.5
    assert r.resolution > 0
    assert any("discrete eigenvalues" in n for n in r.notes)
    assert r.rows() == [{"lo": lo, "hi": hi}]


def test_spectrum_indicial_square():
    bi = build_b_space("interval")
    q = diffop(bi, [("1", ["x_dx", "x_dx"])])
    r = ess_spectrum_oracle(q, window=(-6.0, 2.0))
    assert len(r.intervals) == 1
    lo, hi = r.intervals[0]
    assert abs(hi) <= 5e-2
    assert lo <= -5.5


def test_spectrum_cylinder_shift():
    cyl = build_b_space("cylinder")
    p = diffop(cyl, [("-1", ["x_dx", "x_dx"]), ("-1", ["dth", "dth"]),
                     ("1", [])])
    r = ess_spectrum_oracle(p, window=(0.0, 6.0), levels=(0, 1))
    assert abs(r.intervals[0][0] - 1.0) <= 5e-2


def test_spectrum_keeps_a_genuine_gap():
    sp = build_scattering_space(1)
    q = diffop(sp, {(1, 1): [("tanh(t) - 2", [])],
                    (2, 2): [("tanh(t) + 2", [])]}, shape=2)
    r = ess_spectrum_oracle(q, window=(-4.0, 4.0))
    # true spectrum is [-3, -1] union [1, 3]
    for lo, hi in r.intervals:
        assert hi <= -0.9 or lo >= 0.9
    covered = [I for I in r.intervals if I[0] <= -1.5 <= I[1]]
    assert covered
    covered = [I for I in r.intervals if I[0] <= 1.5 <= I[1]]
    assert covered


def test_empty_window_reports_no_clusters():
    r = ess_spectrum_oracle(schrodinger(), window=(-10.0, -5.0))
    assert r.intervals == []
    assert r.notes


def test_first_order_operator_rejected():
    sp = build_scattering_space(1)
    q = diffop(sp, [("1", ["dt"])])
    with pytest.raises(OracleError):
        ess_spectrum_oracle(q, window=(-1.0, 1.0))


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

def test_cross_validate_two_channel_agreement():
    v = cross_validate(schrodinger(), window=(0.0, 8.0))
    assert v.comparison == "agree"
    assert v.mismatches == []
    assert v.spectral.intervals[0][0] == pytest.approx(1.0, abs=1e-9)


def test_cross_validate_sections_route_is_non_comparable():
    ah = build_ah_space("circle")
    p = diffop(ah, [("-1", ["x_dx", "x_dx"]), ("1", ["x_dx"]),
                    ("-1", ["x_dz", "x_dz"])])
    v = cross_validate(p, window=(0.0, 3.0))
    assert v.comparison == "non-comparable"
