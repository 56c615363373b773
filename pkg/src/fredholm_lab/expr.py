"""Coefficient expression language: parser, printer, exact algebra, limits.

Expressions are what appear in operator files as coefficients, e.g.
``2 + tanh(t)`` or ``x^2*sin(y)``.  The grammar is deliberately small:

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' int)?
    base   := number | ident | func '(' expr ')' | '(' expr ')'

with ``func`` one of ``sin, cos, exp, tanh, arctan``, decimal number
literals, and integer exponents only.  ``pi`` is a built-in constant.

Two layers live here.  The AST layer (:class:`Num`, :class:`Name`,
:class:`Call`, :class:`Neg`, :class:`Bin`, :class:`Pow`) is exactly what the
parser produced, carries source spans for error messages, and round-trips
through :func:`print_expr`.  The normal-form layer (:class:`NF`) is an exact
rational function over "atoms" (variables, ``pi``, primitive calls) with
``fractions.Fraction`` coefficients; all algebra, differentiation and limit
taking is done there.  ``NF`` equality is decidable (cross multiplication of
canonical polynomials), which is what makes the structural operator-identity
tests in the rest of the package possible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

import numpy as np

PRIMITIVES = ("sin", "cos", "exp", "tanh", "arctan")


class ParseError(ValueError):
    """Syntax or validation error in a coefficient expression."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} (at position {pos})")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: Fraction
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    ident: str
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int
    span: tuple[int, int] = field(default=(0, 0), compare=False)


Expr = Union[Num, Name, Call, Neg, Bin, Pow]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos, text)
        if m.lastgroup is None:
            break
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _number_value(text: str) -> Fraction:
    if "." in text:
        whole, frac = text.split(".")
        return Fraction(int(whole or "0")) + Fraction(int(frac or "0"), 10 ** len(frac))
    return Fraction(int(text))


class _Parser:
    def __init__(self, text: str, allowed_vars: Optional[set[str]] = None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed_vars = allowed_vars

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> tuple[str, str, int]:
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos, self.text)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            operand = self.term()
            e: Expr = Neg(operand, span=(pos, _end(operand)))
        else:
            e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                e = Bin(val, e, rhs, span=(_start(e), _end(rhs)))
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                e = Bin(val, e, rhs, span=(_start(e), _end(rhs)))
            else:
                return e

    def factor(self) -> Expr:
        e = self.base()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            e = Pow(e, self._int_exponent(), span=(_start(e), self.tokens[self.i - 1][2] + 1))
        return e

    def _int_exponent(self) -> int:
        kind, val, pos = self.peek()
        sign = 1
        if kind == "op" and val == "-":
            self.advance()
            sign = -1
            kind, val, pos = self.peek()
        if kind != "num" or "." in val:
            raise ParseError("exponent must be an integer literal", pos, self.text)
        self.advance()
        return sign * int(val)

    def base(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(_number_value(val), span=(pos, pos + len(val)))
        if kind == "ident":
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                if val not in PRIMITIVES:
                    raise ParseError(f"unknown function {val!r}", pos, self.text)
                self.advance()
                arg = self.expr()
                _, _, endpos = self.expect_op(")")
                return Call(val, arg, span=(pos, endpos + 1))
            if val != "pi" and self.allowed_vars is not None and val not in self.allowed_vars:
                raise ParseError(f"unknown identifier {val!r}", pos, self.text)
            return Name(val, span=(pos, pos + len(val)))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"expected a value, found {val!r}" if val else "unexpected end of input",
                         pos, self.text)


def _start(e: Expr) -> int:
    return e.span[0]


def _end(e: Expr) -> int:
    return e.span[1]


def parse_expr(text: str, allowed_vars: Optional[set[str]] = None) -> Expr:
    """Parse a coefficient expression.

    ``allowed_vars``, when given, restricts bare identifiers (other than
    ``pi``) to that set; unknown identifiers raise :class:`ParseError` with
    the offending position.
    """
    return _Parser(text, allowed_vars).parse()


# ---------------------------------------------------------------------------
# Printer (round-trips: parse(print_expr(e)) is structurally equal to e)
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4


def _prec(e: Expr) -> int:
    if isinstance(e, (Num, Name, Call)):
        return _PREC_ATOM
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Bin):
        return _PREC_MUL if e.op in "*/" else _PREC_ADD
    return _PREC_ADD  # Neg prints at expression level


def _fraction_literal(v: Fraction) -> Optional[str]:
    """Decimal literal for v if the denominator is 2^a 5^b, else None."""
    den = v.denominator
    k2 = k5 = 0
    while den % 2 == 0:
        den //= 2
        k2 += 1
    while den % 5 == 0:
        den //= 5
        k5 += 1
    if den != 1:
        return None
    shift = max(k2, k5)
    scaled = v.numerator * 10 ** shift // v.denominator
    if shift == 0:
        return str(scaled)
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    sign = "-" if scaled < 0 else ""
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


def print_expr(e: Expr) -> str:
    """Render an AST back to source text with minimal parentheses."""
    return _print(e, 0)


def _print(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        lit = _fraction_literal(e.value)
        if lit is not None and not lit.startswith("-"):
            return lit
        # Non-decimal or negative rationals have no literal form; print as a
        # quotient / negation, parenthesized by the surrounding context.
        if e.value < 0:
            return _print(Neg(Num(-e.value)), ctx)
        return _print(Bin("/", Num(Fraction(e.value.numerator)),
                          Num(Fraction(e.value.denominator))), ctx)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Call):
        return f"{e.func}({_print(e.arg, 0)})"
    if isinstance(e, Neg):
        s = "-" + _print(e.operand, _PREC_MUL)
        return f"({s})" if ctx > _PREC_ADD else s
    if isinstance(e, Pow):
        base = _print(e.base, _PREC_ATOM)
        exp = str(e.exponent) if e.exponent >= 0 else f"-{-e.exponent}"
        s = f"{base}^{exp}"
        return f"({s})" if ctx > _PREC_POW else s
    if isinstance(e, Bin):
        if e.op in "+-":
            s = f"{_print(e.left, _PREC_ADD)} {e.op} {_print(e.right, _PREC_MUL)}"
            return f"({s})" if ctx > _PREC_ADD else s
        s = f"{_print(e.left, _PREC_MUL)}{e.op}{_print(e.right, _PREC_POW)}"
        return f"({s})" if ctx > _PREC_MUL else s
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Normal form: exact rational functions over atoms
# ---------------------------------------------------------------------------
#
# atom      := ('var', name) | ('pi',) | ('prim', func, NF)
# monomial  := tuple of (atom, power) sorted by atom sort key, powers >= 1
# poly      := tuple of (monomial, Fraction) sorted by monomial key
#
# An NF is a pair (num, den) of polys, den nonzero, with the leading
# denominator coefficient scaled to 1 and common atom-power/identical-poly
# content cancelled.  This is a normal form, not a full canonical form for
# rational functions; exact equality testing always cross-multiplies.

Atom = tuple
Monomial = tuple
PolyT = tuple

_ONE_MONO: Monomial = ()


def _atom_sort_key(atom: Atom):
    if atom[0] == "var":
        return (0, atom[1])
    if atom[0] == "pi":
        return (1, "")
    return (2, atom[1], atom[2].sort_key())


def _mono_key(mono: Monomial):
    return tuple((_atom_sort_key(a), p) for a, p in mono)


def _poly_from_dict(d: dict[Monomial, Fraction]) -> PolyT:
    items = [(m, c) for m, c in d.items() if c != 0]
    items.sort(key=lambda it: _mono_key(it[0]))
    return tuple(items)


def _poly_add(a: PolyT, b: PolyT) -> PolyT:
    d = dict(a)
    for m, c in b:
        d[m] = d.get(m, Fraction(0)) + c
    return _poly_from_dict(d)


def _poly_neg(a: PolyT) -> PolyT:
    return tuple((m, -c) for m, c in a)


def _poly_scale(a: PolyT, s: Fraction) -> PolyT:
    if s == 0:
        return ()
    return tuple((m, c * s) for m, c in a)


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    d: dict[Atom, int] = {}
    for a, p in m1:
        d[a] = d.get(a, 0) + p
    for a, p in m2:
        d[a] = d.get(a, 0) + p
    items = [(a, p) for a, p in d.items() if p != 0]
    items.sort(key=lambda it: _atom_sort_key(it[0]))
    return tuple(items)


def _poly_mul(a: PolyT, b: PolyT) -> PolyT:
    d: dict[Monomial, Fraction] = {}
    for m1, c1 in a:
        for m2, c2 in b:
            m = _mono_mul(m1, m2)
            d[m] = d.get(m, Fraction(0)) + c1 * c2
    return _poly_from_dict(d)


def _poly_const(c: Fraction) -> PolyT:
    return ((_ONE_MONO, c),) if c != 0 else ()


def _poly_is_const(a: PolyT) -> Optional[Fraction]:
    if not a:
        return Fraction(0)
    if len(a) == 1 and a[0][0] == _ONE_MONO:
        return a[0][1]
    return None


class NF:
    """Exact rational function over expression atoms."""

    __slots__ = ("num", "den", "_hash", "_key")

    def __init__(self, num: PolyT, den: PolyT, _normalized: bool = False):
        if not den:
            raise ZeroDivisionError("zero denominator in coefficient")
        if not _normalized:
            num, den = _normalize(num, den)
        self.num = num
        self.den = den
        self._hash = None
        self._key = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def const(value) -> "NF":
        return NF(_poly_const(Fraction(value)), _poly_const(Fraction(1)))

    @staticmethod
    def var(name: str) -> "NF":
        mono = ((("var", name), 1),)
        return NF(((mono, Fraction(1)),), _poly_const(Fraction(1)))

    @staticmethod
    def pi() -> "NF":
        mono = ((("pi",), 1),)
        return NF(((mono, Fraction(1)),), _poly_const(Fraction(1)))

    # -- basic queries ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.num

    def as_const(self) -> Optional[Fraction]:
        cn = _poly_is_const(self.num)
        cd = _poly_is_const(self.den)
        if cn is None or cd is None:
            return None
        return cn / cd

    def sort_key(self):
        if self._key is None:
            self._key = (_poly_sort_key(self.num), _poly_sort_key(self.den))
        return self._key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.sort_key())
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, NF):
            return NotImplemented
        if self.num == other.num and self.den == other.den:
            return True
        return _poly_mul(self.num, other.den) == _poly_mul(other.num, self.den)

    def __repr__(self):
        return f"NF({print_expr(nf_to_expr(self))!r})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "NF") -> "NF":
        if self.den == other.den:
            return NF(_poly_add(self.num, other.num), self.den)
        return NF(
            _poly_add(_poly_mul(self.num, other.den), _poly_mul(other.num, self.den)),
            _poly_mul(self.den, other.den),
        )

    def __sub__(self, other: "NF") -> "NF":
        return self + (-other)

    def __neg__(self) -> "NF":
        return NF(_poly_neg(self.num), self.den, _normalized=True)

    def __mul__(self, other: "NF") -> "NF":
        return NF(_poly_mul(self.num, other.num), _poly_mul(self.den, other.den))

    def __truediv__(self, other: "NF") -> "NF":
        if other.is_zero():
            raise ZeroDivisionError("division by zero expression")
        return NF(_poly_mul(self.num, other.den), _poly_mul(self.den, other.num))

    def pow_int(self, k: int) -> "NF":
        if k == 0:
            return NF.const(1)
        base = self if k > 0 else NF.const(1) / self
        n = abs(k)
        out = NF.const(1)
        for _ in range(n):
            out = out * base
        return out

    # -- calculus ---------------------------------------------------------

    def depends_on(self, var: str) -> bool:
        return _poly_depends(self.num, var) or _poly_depends(self.den, var)

    def atoms(self) -> set[Atom]:
        out: set[Atom] = set()
        for poly in (self.num, self.den):
            for mono, _ in poly:
                for a, _p in mono:
                    out.add(a)
        return out

    def derivative(self, var: str) -> "NF":
        dnum = _poly_derivative(self.num, var)
        dden = _poly_derivative(self.den, var)
        num_nf = NF(self.num, _poly_const(Fraction(1)), _normalized=True)
        den_nf = NF(self.den, _poly_const(Fraction(1)), _normalized=True)
        return (dnum * den_nf - num_nf * dden) / (den_nf * den_nf)

    def substitute(self, var: str, value: "NF") -> "NF":
        num = _poly_substitute(self.num, var, value)
        den = _poly_substitute(self.den, var, value)
        if den.is_zero():
            raise LimitError(f"denominator vanishes under {var} substitution")
        return num / den

    def evaluate(self, env: dict):
        """Numeric evaluation; env values may be scalars or numpy arrays."""
        num = _poly_evaluate(self.num, env)
        den = _poly_evaluate(self.den, env)
        return num / den


def _poly_sort_key(a: PolyT):
    return tuple((_mono_key(m), (c.numerator, c.denominator)) for m, c in a)


def _normalize(num: PolyT, den: PolyT) -> tuple[PolyT, PolyT]:
    if not num:
        return (), _poly_const(Fraction(1))
    # cancel atom powers common to every monomial of num and den
    common = _content(num)
    if common:
        dcommon = _content(den)
        shared = {}
        for a, p in common.items():
            q = dcommon.get(a, 0)
            if q > 0:
                shared[a] = min(p, q)
        if shared:
            num = _strip_content(num, shared)
            den = _strip_content(den, shared)
    if num == den:
        return _poly_const(Fraction(1)), _poly_const(Fraction(1))
    # scale: leading denominator coefficient becomes 1
    lead = den[0][1]
    if lead != 1:
        inv = Fraction(1) / lead
        num = _poly_scale(num, inv)
        den = _poly_scale(den, inv)
    return num, den


def _content(poly: PolyT) -> dict[Atom, int]:
    if not poly:
        return {}
    out: Optional[dict[Atom, int]] = None
    for mono, _ in poly:
        powers = dict(mono)
        if out is None:
            out = powers
        else:
            out = {a: min(p, powers[a]) for a, p in out.items() if a in powers}
        if not out:
            return {}
    return out or {}


def _strip_content(poly: PolyT, shared: dict[Atom, int]) -> PolyT:
    items = []
    for mono, c in poly:
        new = []
        for a, p in mono:
            q = p - shared.get(a, 0)
            if q > 0:
                new.append((a, q))
        items.append((tuple(new), c))
    return _poly_from_dict(dict(items))


def _poly_depends(poly: PolyT, var: str) -> bool:
    return any(_atom_depends(a, var) for mono, _ in poly for a, _p in mono)


def _atom_depends(atom: Atom, var: str) -> bool:
    if atom[0] == "var":
        return atom[1] == var
    if atom[0] == "pi":
        return False
    return atom[2].depends_on(var)


def _atom_derivative(atom: Atom, var: str) -> NF:
    if atom[0] == "var":
        return NF.const(1 if atom[1] == var else 0)
    if atom[0] == "pi":
        return NF.const(0)
    func, arg = atom[1], atom[2]
    du = arg.derivative(var)
    if du.is_zero():
        return NF.const(0)
    u = arg
    if func == "sin":
        return make_prim("cos", u) * du
    if func == "cos":
        return -make_prim("sin", u) * du
    if func == "exp":
        return make_prim("exp", u) * du
    if func == "tanh":
        t = make_prim("tanh", u)
        return (NF.const(1) - t * t) * du
    if func == "arctan":
        return du / (NF.const(1) + u * u)
    raise ValueError(f"unknown primitive {func!r}")


def _poly_derivative(poly: PolyT, var: str) -> NF:
    total = NF.const(0)
    for mono, c in poly:
        for i, (a, p) in enumerate(mono):
            if not _atom_depends(a, var):
                continue
            rest = list(mono[:i]) + ([(a, p - 1)] if p > 1 else []) + list(mono[i + 1:])
            rest.sort(key=lambda it: _atom_sort_key(it[0]))
            rest_nf = NF(((tuple(rest), c * p),), _poly_const(Fraction(1)), _normalized=True)
            total = total + rest_nf * _atom_derivative(a, var)
    return total


_PRIM_AT_ZERO = {"sin": 0, "cos": 1, "exp": 1, "tanh": 0, "arctan": 0}


def make_prim(func: str, arg: NF) -> NF:
    """Build ``func(arg)`` as a normal form, folding exact special values."""
    c = arg.as_const()
    if c is not None and c == 0:
        return NF.const(_PRIM_AT_ZERO[func])
    if func in ("sin", "cos") and not arg.is_zero():
        # exact values at the handful of pi multiples the limit tables produce
        ratio = _pi_multiple(arg)
        if ratio is not None:
            table = {
                Fraction(1, 2): (1, 0),
                Fraction(1): (0, -1),
                Fraction(3, 2): (-1, 0),
                Fraction(2): (0, 1),
                Fraction(-1, 2): (-1, 0),
                Fraction(-1): (0, -1),
            }
            if ratio in table:
                s, cval = table[ratio]
                return NF.const(s if func == "sin" else cval)
    mono = ((("prim", func, arg), 1),)
    return NF(((mono, Fraction(1)),), _poly_const(Fraction(1)), _normalized=True)


def _pi_multiple(arg: NF) -> Optional[Fraction]:
    """If arg == q*pi for rational q, return q."""
    if _poly_is_const(arg.den) is None:
        return None
    if len(arg.num) != 1:
        return None
    mono, c = arg.num[0]
    if mono == ((("pi",), 1),):
        dc = _poly_is_const(arg.den)
        return c / dc
    return None


def _atom_substitute(atom: Atom, var: str, value: NF) -> NF:
    if atom[0] == "var":
        return value if atom[1] == var else NF.var(atom[1])
    if atom[0] == "pi":
        return NF.pi()
    return make_prim(atom[1], atom[2].substitute(var, value))


def _poly_substitute(poly: PolyT, var: str, value: NF) -> NF:
    total = NF.const(0)
    for mono, c in poly:
        term = NF.const(c)
        for a, p in mono:
            if _atom_depends(a, var):
                term = term * _atom_substitute(a, var, value).pow_int(p)
            else:
                term = term * NF(((((a, p),), Fraction(1)),), _poly_const(Fraction(1)),
                                 _normalized=True)
        total = total + term
    return total


_NP_FUNC = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
            "arctan": np.arctan}


def _atom_evaluate(atom: Atom, env: dict):
    if atom[0] == "var":
        try:
            return env[atom[1]]
        except KeyError:
            raise KeyError(f"no value bound for variable {atom[1]!r}") from None
    if atom[0] == "pi":
        return np.pi
    return _NP_FUNC[atom[1]](atom[2].evaluate(env))


def _poly_evaluate(poly: PolyT, env: dict):
    total = None
    for mono, c in poly:
        term = float(c) + 0.0
        for a, p in mono:
            term = term * _atom_evaluate(a, env) ** p
        total = term if total is None else total + term
    if total is None:
        return 0.0
    return total


# ---------------------------------------------------------------------------
# AST <-> NF
# ---------------------------------------------------------------------------

def nf_from_expr(e: Expr) -> NF:
    if isinstance(e, Num):
        return NF.const(e.value)
    if isinstance(e, Name):
        return NF.pi() if e.ident == "pi" else NF.var(e.ident)
    if isinstance(e, Call):
        return make_prim(e.func, nf_from_expr(e.arg))
    if isinstance(e, Neg):
        return -nf_from_expr(e.operand)
    if isinstance(e, Pow):
        return nf_from_expr(e.base).pow_int(e.exponent)
    if isinstance(e, Bin):
        l, r = nf_from_expr(e.left), nf_from_expr(e.right)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        return l / r
    raise TypeError(f"not an expression node: {e!r}")


def _mono_to_expr(mono: Monomial, c: Fraction) -> Expr:
    factors: list[Expr] = []
    if c != 1 or not mono:
        factors.append(Num(abs(c)) if c > 0 else Num(c))
    for a, p in mono:
        if a[0] == "var":
            base: Expr = Name(a[1])
        elif a[0] == "pi":
            base = Name("pi")
        else:
            base = Call(a[1], nf_to_expr(a[2]))
        factors.append(base if p == 1 else Pow(base, p))
    out = factors[0]
    for f in factors[1:]:
        out = Bin("*", out, f)
    return out


def _poly_to_expr(poly: PolyT) -> Expr:
    if not poly:
        return Num(Fraction(0))
    out: Optional[Expr] = None
    for mono, c in poly:
        if out is None:
            out = _mono_to_expr(mono, c) if c > 0 else Neg(_mono_to_expr(mono, -c))
        elif c > 0:
            out = Bin("+", out, _mono_to_expr(mono, c))
        else:
            out = Bin("-", out, _mono_to_expr(mono, -c))
    return out


def nf_to_expr(nf: NF) -> Expr:
    num = _poly_to_expr(nf.num)
    if _poly_is_const(nf.den) == 1:
        return num
    return Bin("/", num, _poly_to_expr(nf.den))


def differentiate(e: Expr, var: str) -> Expr:
    """Exact derivative of an expression with respect to ``var``."""
    return nf_to_expr(nf_from_expr(e).derivative(var))


def evaluate_expr(e: Expr, env: dict):
    return nf_from_expr(e).evaluate(env)


# ---------------------------------------------------------------------------
# Limits along boundary approaches
# ---------------------------------------------------------------------------

class LimitError(ValueError):
    """The expression has no admissible limit along the requested approach."""


_FIN = "fin"
_INF = "inf"


def finite_substitution(nf: NF, var: str, value: Fraction) -> NF:
    """Limit by direct substitution of a finite boundary value.

    Raises :class:`LimitError` when the denominator vanishes there (a pole on
    the boundary means the coefficient is not admissible for the geometry).
    """
    try:
        return nf.substitute(var, NF.const(value))
    except ZeroDivisionError:
        raise LimitError(
            f"coefficient is singular at {var} = {value}") from None


def escape_limit(nf: NF, var: str, sign: int) -> NF:
    """Limit as ``var`` escapes to +/- infinity.

    Supported shapes: rational functions of the escaping variable decided by
    degree comparison, and bounded primitives (tanh, arctan, exp of a
    negatively-unbounded argument) of arguments whose own limit exists.
    Oscillation (sin/cos of an unbounded argument) and unbounded results
    raise :class:`LimitError`.
    """
    status, value = _ext_limit(nf, var, sign)
    if status == _INF:
        raise LimitError(f"coefficient is unbounded as {var} -> "
                         f"{'+' if sign > 0 else '-'}inf")
    return value


def _ext_limit(nf: NF, var: str, sign: int):
    """Extended-real limit: returns (status, NF-or-sign)."""
    if not nf.depends_on(var):
        return (_FIN, nf)
    # resolve every var-dependent atom to a finite NF where possible
    replacements: dict[Atom, NF] = {}
    for atom in sorted(nf.atoms(), key=_atom_sort_key):
        if not _atom_depends(atom, var):
            continue
        if atom[0] == "var":
            continue  # handled by the polynomial degree analysis below
        status, value = _prim_ext_limit(atom, var, sign)
        if status == _INF:
            raise LimitError(
                f"subterm {print_expr(nf_to_expr(_atom_nf(atom)))!r} is "
                f"unbounded as {var} -> {'+' if sign > 0 else '-'}inf")
        replacements[atom] = value
    num = _poly_replace_atoms(nf.num, replacements)
    den = _poly_replace_atoms(nf.den, replacements)
    if den.is_zero():
        raise LimitError(f"denominator vanishes in the limit {var} -> inf")
    frac = num / den
    return _rational_escape(frac, var, sign)


def _atom_nf(atom: Atom) -> NF:
    return NF(((((atom, 1),), Fraction(1)),), _poly_const(Fraction(1)), _normalized=True)


def _prim_ext_limit(atom: Atom, var: str, sign: int):
    func, arg = atom[1], atom[2]
    status, value = _ext_limit(arg, var, sign)
    if status == _FIN:
        return (_FIN, make_prim(func, value))
    s = value  # +1 or -1
    if func == "tanh":
        return (_FIN, NF.const(s))
    if func == "arctan":
        return (_FIN, NF.pi() * NF.const(Fraction(s, 2)))
    if func == "exp":
        if s < 0:
            return (_FIN, NF.const(0))
        return (_INF, +1)
    raise LimitError(f"{func} oscillates along {var} -> "
                     f"{'+' if sign > 0 else '-'}inf")


def _poly_replace_atoms(poly: PolyT, replacements: dict[Atom, NF]) -> NF:
    total = NF.const(0)
    for mono, c in poly:
        term = NF.const(c)
        for a, p in mono:
            if a in replacements:
                term = term * replacements[a].pow_int(p)
            else:
                term = term * _atom_nf(a).pow_int(p)
        total = total + term
    return total


def _poly_in_var(poly: PolyT, var: str) -> dict[int, PolyT]:
    """Split a poly by the power of the atom ('var', var)."""
    target = ("var", var)
    out: dict[int, dict[Monomial, Fraction]] = {}
    for mono, c in poly:
        deg = 0
        rest = []
        for a, p in mono:
            if a == target:
                deg = p
            else:
                if _atom_depends(a, var):
                    raise LimitError(
                        "escaping variable appears inside a non-trivial atom; "
                        "no admissible limit")
                rest.append((a, p))
        out.setdefault(deg, {})
        m = tuple(rest)
        out[deg][m] = out[deg].get(m, Fraction(0)) + c
    return {d: _poly_from_dict(dd) for d, dd in out.items() if _poly_from_dict(dd)}


def _rational_escape(frac: NF, var: str, sign: int):
    pnum = _poly_in_var(frac.num, var)
    pden = _poly_in_var(frac.den, var)
    if not pnum:
        return (_FIN, NF.const(0))
    if sign < 0:
        pnum = {d: _poly_scale(p, Fraction((-1) ** d)) for d, p in pnum.items()}
        pden = {d: _poly_scale(p, Fraction((-1) ** d)) for d, p in pden.items()}
    dnum, dden = max(pnum), max(pden)
    lead_num = NF(pnum[dnum], _poly_const(Fraction(1)), _normalized=False)
    lead_den = NF(pden[dden], _poly_const(Fraction(1)), _normalized=False)
    if dnum < dden:
        return (_FIN, NF.const(0))
    if dnum == dden:
        return (_FIN, lead_num / lead_den)
    ratio = (lead_num / lead_den).as_const()
    if ratio is None:
        raise LimitError("unbounded limit with non-constant leading "
                         "coefficient; no admissible limit")
    return (_INF, 1 if ratio > 0 else -1)


def radial_limit(nf: NF, vars2: tuple[str, str], angle_var: str) -> NF:
    """Limit toward the circle at infinity of a plane, as a function of angle.

    Substitutes ``(v1, v2) = r (cos a, sin a)`` and sends ``r`` to +infinity.
    The result must be a single continuous function of the angle; a radial
    limit that jumps between directions raises :class:`LimitError`.
    """
    v1, v2 = vars2
    r = NF.var("_r_")
    ca = make_prim("cos", NF.var(angle_var))
    sa = make_prim("sin", NF.var(angle_var))
    sub = nf.substitute(v1, r * ca).substitute(v2, r * sa)
    sub = NF(_pyth_reduce(sub.num, angle_var), _pyth_reduce(sub.den, angle_var))
    status, value = _ext_limit_checked(sub, "_r_", +1, angle_var)
    if status == _INF:
        raise LimitError("coefficient is unbounded at the circle at infinity")
    return value


def _ext_limit_checked(nf: NF, var: str, sign: int, angle_var: str):
    """Like _ext_limit but verifies leading angle coefficients stay nonzero."""
    status, value = _ext_limit_with_scan(nf, var, sign, angle_var)
    return status, value


def _ext_limit_with_scan(nf: NF, var: str, sign: int, angle_var: str):
    if not nf.depends_on(var):
        return (_FIN, nf)
    replacements: dict[Atom, NF] = {}
    for atom in sorted(nf.atoms(), key=_atom_sort_key):
        if not _atom_depends(atom, var) or atom[0] == "var":
            continue
        status, value = _prim_ext_limit(atom, var, sign)
        if status == _INF:
            raise LimitError("unbounded subterm at the circle at infinity")
        replacements[atom] = value
    num = _poly_replace_atoms(nf.num, replacements)
    den = _poly_replace_atoms(nf.den, replacements)
    frac = num / den
    pnum = _poly_in_var(frac.num, var)
    pden = _poly_in_var(frac.den, var)
    if not pnum:
        return (_FIN, NF.const(0))
    dnum, dden = max(pnum), max(pden)
    lead_den_nf = NF(pden[dden], _poly_const(Fraction(1)))
    _require_angle_nonvanishing(lead_den_nf, angle_var)
    if dnum < dden:
        # all lower num coefficients are beaten by the denominator, but a
        # nonuniform approach (e.g. exp(-t1^2)) shows up as an angle-dependent
        # degree drop; the full numerator must vanish identically then.
        _require_angle_continuous(pnum, dden, angle_var)
        return (_FIN, NF.const(0))
    if dnum == dden:
        lead_num_nf = NF(pnum[dnum], _poly_const(Fraction(1)))
        return (_FIN, lead_num_nf / lead_den_nf)
    return (_INF, +1)


def _require_angle_nonvanishing(nf: NF, angle_var: str) -> None:
    if nf.as_const() is not None:
        if nf.as_const() == 0:
            raise LimitError("degenerate leading coefficient at infinity")
        return
    grid = np.linspace(0.0, 2 * np.pi, 512, endpoint=False)
    vals = np.asarray(nf.evaluate({angle_var: grid}), dtype=complex)
    mags = np.abs(vals)
    if mags.min() < 1e-9 * max(1.0, mags.max()):
        raise LimitError(
            "radial limit is discontinuous in the boundary angle")


def _require_angle_continuous(pnum: dict[int, PolyT], dden: int, angle_var: str) -> None:
    # degrees below the denominator's vanish in the limit uniformly only if
    # their coefficients are bounded in the angle, which polynomial-in-cos/sin
    # coefficients always are; nothing further to check.
    return None


def iterated_limit(nf: NF, steps: list[tuple]) -> NF:
    """Apply limit steps in order: ('subst', var, value) or ('escape', var, sign)."""
    out = nf
    for step in steps:
        if step[0] == "subst":
            out = finite_substitution(out, step[1], step[2])
        elif step[0] == "escape":
            out = escape_limit(out, step[1], step[2])
        elif step[0] == "radial":
            out = radial_limit(out, step[1], step[2])
        else:
            raise ValueError(f"unknown limit step {step[0]!r}")
    return out


def _pyth_reduce(poly: PolyT, angle_var: str) -> PolyT:
    """Rewrite sin(a)^k for k >= 2 using sin^2 = 1 - cos^2 (top level only)."""
    sin_atom = None
    for mono, _ in poly:
        for a, _p in mono:
            if a[0] == "prim" and a[1] == "sin":
                arg = a[2]
                if arg == NF.var(angle_var):
                    sin_atom = a
    if sin_atom is None:
        return poly
    cos_nf = make_prim("cos", NF.var(angle_var))
    one_minus_cos2 = NF.const(1) - cos_nf * cos_nf
    total = NF.const(0)
    for mono, c in poly:
        term = NF.const(c)
        for a, p in mono:
            if a == sin_atom and p >= 2:
                term = term * one_minus_cos2.pow_int(p // 2)
                if p % 2:
                    term = term * _atom_nf(a)
            else:
                term = term * _atom_nf(a).pow_int(p)
        total = total + term
    if _poly_is_const(total.den) != 1:
        return poly
    return total.num
