"""Operator-file parsing: happy paths over the shipped fixtures, and the
validation errors the format promises."""

import pytest

from fredholm_lab.calculus import diffop, op_equal
from fredholm_lab.geometry import build_scattering_space, is_fredholm_groupoid
from fredholm_lab.opfile import (
    OpFileError,
    load_operator_file,
    parse_operator_file,
)


HVZ = """
geometry {
  class = "sc"
  dim = 1
}
operator {
  order = 2
  coeff "-1" gens [dt, dt]
  coeff "2 + tanh(t)" gens []
}
"""


def test_parse_hvz_text():
    pf = parse_operator_file(HVZ)
    assert pf.space.geometry_class == "sc"
    assert [s.id for s in pf.space.strata] == ["interior", "tminus", "tplus"]
    want = diffop(build_scattering_space(1),
                  [("-1", ["dt", "dt"]), ("2 + tanh(t)", [])])
    assert op_equal(pf.operator.op, want)
    assert pf.operator.order == 2
    assert pf.queries == []


def test_shipped_fixture_queries():
    pf = load_operator_file("ops/hvz_step.op")
    kinds = [q.kind for q in pf.queries]
    assert kinds == ["check", "essspec"]
    assert pf.queries[0].params["lambda_grid"] == "0:4:0.25"
    assert pf.queries[1].params["window"] == "0:8"


def test_blowup_fixture_is_geometry_only():
    pf = load_operator_file("ops/blowup_disk.op")
    assert pf.operator is None
    assert [s.id for s in pf.space.strata] == ["interior", "S_p", "S_c"]
    assert max(r.new_depth for r in pf.space.records) == 2


def test_retagged_fixture_fails_the_predicate():
    pf = load_operator_file("ops/bad_isotropy.op")
    pred = is_fredholm_groupoid(pf.space)
    assert not pred.holds
    assert "x0" in pred.failing_strata


def test_every_shipped_fixture_parses():
    import glob
    paths = sorted(glob.glob("ops/*.op"))
    assert len(paths) >= 8
    for path in paths:
        load_operator_file(path)


# ---------------------------------------------------------------------------
# validation errors
# ---------------------------------------------------------------------------

def test_generator_not_in_frame():
    text = """
geometry { class = "b"
  shape = "interval"
}
operator {
  order = 2
  coeff "1" gens [x_dz, x_dz]
}
"""
    with pytest.raises(OpFileError, match="not in the frame"):
        parse_operator_file(text)


def test_empty_operator_rejected():
    text = 'geometry { class = "sc"\n dim = 1\n}\noperator { order = 2\n}'
    with pytest.raises(OpFileError, match="no terms"):
        parse_operator_file(text)


def test_inadmissible_coefficient_rejected():
    text = HVZ.replace("2 + tanh(t)", "sin(t)")
    with pytest.raises(OpFileError, match="no limit at stratum"):
        parse_operator_file(text)


def test_word_longer_than_declared_order():
    text = HVZ.replace("order = 2", "order = 1")
    with pytest.raises(OpFileError, match="exceeds the declared order"):
        parse_operator_file(text)


def test_unattained_order_needs_lower_order_flag():
    text = """
geometry { class = "sc"
  dim = 1
}
operator {
  order = 2
  coeff "1" gens [dt]
}
"""
    with pytest.raises(OpFileError, match="lower_order"):
        parse_operator_file(text)
    relaxed = text.replace("order = 2",
                           "order = 2\n  lower_order = true")
    pf = parse_operator_file(relaxed)
    assert pf.operator.lower_order
    assert pf.operator.op.order == 1


def test_matrix_entries():
    text = """
geometry { class = "sc"
  dim = 1
}
operator {
  order = 0
  matrix = 2
  coeff "tanh(t)" gens []
  entry 2 2
  coeff "1" gens []
}
"""
    pf = parse_operator_file(text)
    p = pf.operator.op
    assert p.shape == 2
    assert p.entries[0][1] == {}
    assert list(p.entries[1][1]) == [()]


def test_entry_outside_matrix_rejected():
    text = """
geometry { class = "sc"
  dim = 1
}
operator {
  order = 0
  matrix = 2
  entry 3 1
  coeff "1" gens []
}
"""
    with pytest.raises(OpFileError, match="outside"):
        parse_operator_file(text)


def test_error_carries_line_number():
    text = HVZ.replace('coeff "-1" gens [dt, dt]',
                       'coeff "-1" gens [bogus, dt]')
    with pytest.raises(OpFileError) as exc:
        parse_operator_file(text)
    assert exc.value.line == 8
    assert "line 8" in str(exc.value)


def test_unknown_geometry_class():
    with pytest.raises(OpFileError, match="unknown geometry class"):
        parse_operator_file('geometry { class = "weird"\n}')


def test_unknown_fibration():
    with pytest.raises(OpFileError, match="unknown fibration"):
        parse_operator_file(
            'geometry { class = "edge"\n  fibration = "sphere -> point"\n}')


def test_degenerate_fibrations_build():
    pf = parse_operator_file(
        'geometry { class = "edge"\n  fibration = "circle -> point"\n}')
    assert pf.space.geometry_class == "b"
    pf = parse_operator_file(
        'geometry { class = "ah"\n  fibration = "circle -> circle"\n}')
    assert pf.space.geometry_class == "ah"


def test_two_geometry_blocks_rejected():
    text = 'geometry { class = "sc"\n dim = 1\n}\n' * 2
    with pytest.raises(OpFileError, match="exactly one geometry"):
        parse_operator_file(text)


def test_unclosed_block_rejected():
    with pytest.raises(OpFileError, match="never closed"):
        parse_operator_file('geometry { class = "sc"')


def test_unknown_query_key_rejected():
    text = HVZ + '\nquery { flavor = "mild"\n}'
    with pytest.raises(OpFileError, match="unknown query key"):
        parse_operator_file(text)


def test_comment_hash_inside_string_is_kept():
    text = HVZ + '\nquery { window = "0:8"  # trailing comment\n}'
    pf = parse_operator_file(text)
    assert pf.queries[0].params["window"] == "0:8"


def test_bad_blowup_center_syntax():
    text = ('geometry { class = "surface"\n'
            '  blowups = [sphere(p)]\n}')
    with pytest.raises(OpFileError, match="point\\(id\\) or curve"):
        parse_operator_file(text)
