"""Operator specification files.

A file describes one geometry and (usually) one operator on it, plus any
number of default query blocks.  The format is line-oriented:

    # Schrodinger operator with a step-like potential
    geometry {
      class = "sc"
      dim = 1
    }

    operator {
      order = 2
      coeff "-1" gens [dt, dt]
      coeff "2 + tanh(t)" gens []
    }

    query {
      kind = "essspec"
      window = "0:8"
    }

Geometry blocks for the other calculi use `shape` (b class),
`fibration` (edge / hyperbolic), `blowups = [point(p), curve(c, p, p,
a, b)]` (surface class), and `retag = tagged(stratum, name, false)` for
isotropy overrides.  Matrix operators switch the target entry with
`entry i j` lines; subsequent `coeff` lines accumulate there.

Parsing validates everything it can see: the geometry must build, every
generator word must live in the geometry's frame, word lengths must
respect the declared order, and every coefficient must have a
well-defined restriction to every boundary stratum.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .calculus import CalculusError, DiffOp, diffop
from .expr import ParseError, nf_from_expr, parse_expr
from .geometry import (
    CurveCenter,
    GeometryError,
    PointCenter,
    StratifiedSpace,
    blowup,
    boundary_limit_nf,
    build_ah_space,
    build_b_space,
    build_edge_space,
    build_scattering_space,
    retag_isotropy,
    smooth_surface,
    transformation_space,
)

__all__ = ["OpFileError", "OperatorSpec", "Query", "ParsedFile",
           "parse_operator_file", "load_operator_file"]


class OpFileError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


@dataclass
class OperatorSpec:
    """A validated operator: the symbolic object plus file metadata."""

    op: DiffOp
    order: int
    shape: int
    sobolev: float = 0.0
    lower_order: bool = False


@dataclass
class Query:
    kind: str = "check"
    params: dict = field(default_factory=dict)


@dataclass
class ParsedFile:
    space: StratifiedSpace
    operator: Optional[OperatorSpec]
    queries: list


# ---------------------------------------------------------------------------
# low-level value syntax
# ---------------------------------------------------------------------------

@dataclass
class _Call:
    name: str
    args: list


_TOKEN = re.compile(r"""
    \s*(
      "(?:[^"\\]|\\.)*"          # quoted string
    | [-+]?\d+\.\d*(?:[eE][-+]?\d+)?
    | [-+]?\.?\d+(?:[eE][-+]?\d+)?
    | [A-Za-z_][A-Za-z_0-9]*
    | [\[\](),=]
    )""", re.VERBOSE)


def _tokenize_value(text: str, line: int) -> list:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise OpFileError(f"cannot read value near {text[pos:]!r}",
                                  line)
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _ValueParser:
    def __init__(self, tokens: list, line: int):
        self.toks = tokens
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise OpFileError("value ends unexpectedly", self.line)
        self.i += 1
        return t

    def parse(self):
        v = self.value()
        if self.peek() is not None:
            raise OpFileError(f"trailing {self.peek()!r} after value",
                              self.line)
        return v

    def value(self):
        t = self.take()
        if t == "[":
            items = []
            if self.peek() == "]":
                self.take()
                return items
            while True:
                items.append(self.value())
                nxt = self.take()
                if nxt == "]":
                    return items
                if nxt != ",":
                    raise OpFileError(f"expected ',' or ']', got {nxt!r}",
                                      self.line)
        if t.startswith('"'):
            return t[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        if t in ("true", "false"):
            return t == "true"
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", t):
            if self.peek() == "(":
                self.take()
                args = []
                if self.peek() == ")":
                    self.take()
                    return _Call(t, args)
                while True:
                    args.append(self.value())
                    nxt = self.take()
                    if nxt == ")":
                        return _Call(t, args)
                    if nxt != ",":
                        raise OpFileError(
                            f"expected ',' or ')', got {nxt!r}", self.line)
            return t
        try:
            if re.fullmatch(r"[-+]?\d+", t):
                return int(t)
            return float(t)
        except ValueError:
            raise OpFileError(f"cannot read value {t!r}", self.line) from None


def _parse_value(text: str, line: int):
    return _ValueParser(_tokenize_value(text, line), line).parse()


# ---------------------------------------------------------------------------
# file structure
# ---------------------------------------------------------------------------

def _strip_comment(raw: str) -> str:
    out, quoted = [], False
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == '"' and (i == 0 or raw[i - 1] != "\\"):
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
        i += 1
    return "".join(out).rstrip()


@dataclass
class _Block:
    name: str
    line: int
    directives: list            # (key, value-text, line)
    statements: list            # (head, rest, line) for coeff/entry lines


_STATEMENT_HEADS = ("coeff", "entry")


def _line_events(text: str):
    """(kind, payload, lineno) with kind in open/content/close.  Braces may
    share a line with the header or the last directive."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        while line:
            brace = _top_level(line, "{")
            if brace is not None:
                head = line[:brace].strip()
                yield ("open", head, lineno)
                line = line[brace + 1:].strip()
                continue
            closer = _top_level(line, "}")
            if closer is not None:
                content = line[:closer].strip()
                if content:
                    yield ("content", content, lineno)
                if line[closer + 1:].strip():
                    raise OpFileError("nothing may follow '}' on a line",
                                      lineno)
                yield ("close", "", lineno)
                break
            yield ("content", line, lineno)
            break


def _top_level(line: str, ch: str) -> Optional[int]:
    quoted = False
    for i, c in enumerate(line):
        if c == '"' and (i == 0 or line[i - 1] != "\\"):
            quoted = not quoted
        elif c == ch and not quoted:
            return i
    return None


def _split_blocks(text: str) -> list:
    blocks = []
    current = None
    for kind, payload, lineno in _line_events(text):
        if kind == "open":
            if current is not None:
                raise OpFileError("blocks do not nest", lineno)
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", payload):
                raise OpFileError(
                    f"expected a block header like 'geometry {{', got "
                    f"{payload!r} before '{{'", lineno)
            current = _Block(payload, lineno, [], [])
            continue
        if kind == "close":
            if current is None:
                raise OpFileError("'}' with no open block", lineno)
            blocks.append(current)
            current = None
            continue
        if current is None:
            raise OpFileError(
                f"expected a block header like 'geometry {{', got "
                f"{payload!r}", lineno)
        head = payload.split(None, 1)[0]
        if head in _STATEMENT_HEADS:
            rest = payload[len(head):].strip()
            current.statements.append((head, rest, lineno))
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.+)", payload)
        if not m:
            raise OpFileError(f"expected 'key = value', got {payload!r}",
                              lineno)
        current.directives.append((m.group(1), m.group(2), lineno))
    if current is not None:
        raise OpFileError(f"block '{current.name}' is never closed",
                          current.line)
    return blocks


# ---------------------------------------------------------------------------
# geometry assembly
# ---------------------------------------------------------------------------

_EDGE_FIBRATIONS = {
    ("torus", "circle"): lambda: build_edge_space("circle", "circle"),
    ("circle", "circle"): lambda: build_ah_space("circle"),
    ("circle", "point"): lambda: build_b_space("circle_end"),
    ("point", "point"): lambda: build_b_space("point_end"),
}


def _build_geometry(block: _Block) -> StratifiedSpace:
    keys = {}
    lines = {}
    for key, vtext, lineno in block.directives:
        if key in keys:
            raise OpFileError(f"duplicate geometry key '{key}'", lineno)
        keys[key] = _parse_value(vtext, lineno)
        lines[key] = lineno
    if block.statements:
        head, _, lineno = block.statements[0]
        raise OpFileError(f"'{head}' does not belong in a geometry block",
                          lineno)
    cls = keys.pop("class", None)
    if cls is None:
        raise OpFileError("geometry block needs a 'class'", block.line)
    try:
        space = _dispatch_class(cls, keys, lines, block.line)
        for center in keys.pop("blowups", []) or []:
            space = blowup(space, _center_of(center, block.line))
        retag = keys.pop("retag", None)
        if retag is not None:
            space = _apply_retag(space, retag, lines.get("retag", block.line))
    except GeometryError as e:
        raise OpFileError(str(e), block.line) from e
    for key in keys:
        if key not in ("dim", "shape", "fibration", "label"):
            raise OpFileError(f"unknown geometry key '{key}'", lines[key])
    return space


def _dispatch_class(cls, keys, lines, at):
    if cls == "sc":
        return build_scattering_space(int(keys.get("dim", 1)))
    if cls == "transformation":
        return transformation_space(int(keys.get("dim", 1)))
    if cls == "b":
        shape = keys.get("shape", "interval")
        return build_b_space(shape)
    if cls in ("edge", "ah"):
        fib = keys.get("fibration")
        if fib is None:
            return build_edge_space() if cls == "edge" else build_ah_space()
        m = re.fullmatch(r"\s*(\w+)\s*->\s*(\w+)\s*", str(fib))
        if not m or (m.group(1), m.group(2)) not in _EDGE_FIBRATIONS:
            known = ", ".join(f"{a} -> {b}" for a, b in _EDGE_FIBRATIONS)
            raise OpFileError(
                f"unknown fibration {fib!r} (supported: {known})",
                lines.get("fibration", at))
        return _EDGE_FIBRATIONS[(m.group(1), m.group(2))]()
    if cls == "surface":
        return smooth_surface(str(keys.get("shape", "disk")))
    raise OpFileError(
        f"unknown geometry class {cls!r} (supported: sc, b, edge, ah, "
        f"transformation, surface)", at)


def _center_of(v, at):
    if isinstance(v, _Call) and v.name == "point" and len(v.args) == 1:
        return PointCenter(str(v.args[0]))
    if isinstance(v, _Call) and v.name == "curve" and len(v.args) in (3, 5):
        args = [str(a) for a in v.args]
        labels = tuple(args[3:5]) if len(args) == 5 else ("", "")
        return CurveCenter(args[0], (args[1], args[2]),
                           tangent_labels=labels)
    raise OpFileError(
        "blowup centers are point(id) or curve(id, end1, end2[, tangent1, "
        "tangent2])", at)


def _apply_retag(space, v, at):
    if isinstance(v, _Call) and v.name == "tagged" and len(v.args) == 3 \
            and isinstance(v.args[2], bool):
        return retag_isotropy(space, str(v.args[0]), str(v.args[1]),
                              v.args[2])
    raise OpFileError(
        "retag must look like tagged(stratum, name, true_or_false)", at)


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

_COEFF_RE = re.compile(r'"((?:[^"\\]|\\.)*)"\s+gens\s+(\[.*\])\s*$')


def _build_operator(block: _Block, space: StratifiedSpace) -> OperatorSpec:
    meta = {}
    for key, vtext, lineno in block.directives:
        if key in meta:
            raise OpFileError(f"duplicate operator key '{key}'", lineno)
        meta[key] = (_parse_value(vtext, lineno), lineno)

    order, _ = meta.pop("order", (None, None))
    if order is None:
        raise OpFileError("operator block needs an 'order'", block.line)
    shape, _ = meta.pop("matrix", (1, None))
    sobolev, _ = meta.pop("sobolev", (0.0, None))
    lower_order, _ = meta.pop("lower_order", (False, None))
    for key, (_, lineno) in meta.items():
        raise OpFileError(f"unknown operator key '{key}'", lineno)
    if not isinstance(order, int) or order < 0:
        raise OpFileError("'order' must be a nonnegative integer", block.line)
    if not isinstance(shape, int) or shape < 1:
        raise OpFileError("'matrix' must be a positive integer", block.line)

    gen_names = {g.name for g in space.gens}
    entry = (1, 1)
    terms: dict = {}
    term_lines = []
    for head, rest, lineno in block.statements:
        if head == "entry":
            m = re.fullmatch(r"(\d+)\s+(\d+)", rest)
            if not m:
                raise OpFileError("entry lines look like 'entry i j'", lineno)
            i, j = int(m.group(1)), int(m.group(2))
            if not (1 <= i <= shape and 1 <= j <= shape):
                raise OpFileError(
                    f"entry ({i}, {j}) outside the {shape}x{shape} matrix",
                    lineno)
            entry = (i, j)
            continue
        m = _COEFF_RE.fullmatch(rest)
        if not m:
            raise OpFileError(
                'coeff lines look like: coeff "expr" gens [g1, g2]', lineno)
        expr_text = m.group(1).replace('\\"', '"')
        gens = _parse_value(m.group(2), lineno)
        if not isinstance(gens, list) or \
                not all(isinstance(g, str) for g in gens):
            raise OpFileError("gens must be a list of generator names",
                              lineno)
        for g in gens:
            if g not in gen_names:
                raise OpFileError(
                    f"generator '{g}' is not in the frame of this geometry "
                    f"(available: {', '.join(sorted(gen_names))})", lineno)
        if len(gens) > order:
            raise OpFileError(
                f"word of length {len(gens)} exceeds the declared order "
                f"{order}", lineno)
        try:
            nf = nf_from_expr(parse_expr(expr_text))
        except ParseError as e:
            raise OpFileError(f"bad coefficient: {e}", lineno) from e
        terms.setdefault(entry, []).append((nf, tuple(gens)))
        term_lines.append((entry, expr_text, lineno))
    if not terms:
        raise OpFileError("operator has no terms", block.line)

    try:
        p = diffop(space, {k: v for k, v in terms.items()}, shape=shape)
    except (CalculusError, GeometryError) as e:
        raise OpFileError(str(e), block.line) from e

    if p.order != order and not lower_order:
        raise OpFileError(
            f"declared order {order} but the longest word has order "
            f"{p.order}; set lower_order = true if that is intended",
            block.line)

    _check_admissibility(p, space, term_lines)
    return OperatorSpec(p, order, shape, float(sobolev), bool(lower_order))


def _check_admissibility(p: DiffOp, space, term_lines):
    """Every coefficient must extend continuously to every boundary
    stratum; this is what makes limit extraction well-defined."""
    strata = [s.id for s in space.strata if s.id != "interior"]
    for i in range(p.shape):
        for j in range(p.shape):
            for w, c in p.entries[i][j].items():
                lineno = None
                for (ei, ej), _, ln in term_lines:
                    if (ei, ej) == (i + 1, j + 1):
                        lineno = ln
                        break
                for sid in strata:
                    try:
                        boundary_limit_nf(c, space, sid)
                    except (GeometryError, ParseError, ValueError) as e:
                        raise OpFileError(
                            f"coefficient of entry ({i + 1}, {j + 1}) has "
                            f"no limit at stratum '{sid}': {e}",
                            lineno) from e


# ---------------------------------------------------------------------------
# queries + entry points
# ---------------------------------------------------------------------------

_QUERY_KEYS = {"kind", "lambda", "lambda_grid", "window", "resolution",
               "strict", "seed"}


def _build_query(block: _Block) -> Query:
    q = Query()
    for key, vtext, lineno in block.directives:
        if key not in _QUERY_KEYS:
            raise OpFileError(
                f"unknown query key '{key}' (one of: "
                f"{', '.join(sorted(_QUERY_KEYS))})", lineno)
        v = _parse_value(vtext, lineno)
        if key == "kind":
            q.kind = str(v)
        else:
            q.params[key] = v
    if block.statements:
        head, _, lineno = block.statements[0]
        raise OpFileError(f"'{head}' does not belong in a query block",
                          lineno)
    return q


def parse_operator_file(text: str) -> ParsedFile:
    blocks = _split_blocks(text)
    geom = [b for b in blocks if b.name == "geometry"]
    ops = [b for b in blocks if b.name == "operator"]
    queries = [b for b in blocks if b.name == "query"]
    other = [b for b in blocks if b.name not in ("geometry", "operator",
                                                 "query")]
    if other:
        raise OpFileError(f"unknown block '{other[0].name}'", other[0].line)
    if len(geom) != 1:
        raise OpFileError("a file needs exactly one geometry block",
                          blocks[0].line if blocks else None)
    if len(ops) > 1:
        raise OpFileError("at most one operator block per file", ops[1].line)

    space = _build_geometry(geom[0])
    opspec = _build_operator(ops[0], space) if ops else None
    return ParsedFile(space, opspec, [_build_query(b) for b in queries])


def load_operator_file(path: str) -> ParsedFile:
    with open(path, encoding="utf-8") as fh:
        return parse_operator_file(fh.read())
