"""Sparse polynomial systems: data model, term decomposition, text format.

Coefficients are kept as exact rationals (pairs of ``Fraction``) so that a
system can be rounded to any working precision without double rounding.
Variables are ``x0 .. x{n-1}``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Coefficient",
    "Monomial",
    "Term",
    "PolySystem",
    "TermInstruction",
    "SystemSyntaxError",
    "parse_system",
    "format_system",
    "decompose_term",
    "cyclic_system",
    "system_stats",
    "SystemStats",
]


class SystemSyntaxError(ValueError):
    """Malformed system text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Coefficient:
    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, value) -> "Coefficient":
        if isinstance(value, Coefficient):
            return value
        if isinstance(value, tuple):
            return cls(_frac(value[0]), _frac(value[1]))
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        return cls(_frac(value))

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __add__(self, other: "Coefficient") -> "Coefficient":
        return Coefficient(self.re + other.re, self.im + other.im)

    def __mul__(self, other) -> "Coefficient":
        other = Coefficient.of(other)
        return Coefficient(self.re * other.re - self.im * other.im, self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __neg__(self) -> "Coefficient":
        return Coefficient(-self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(float(value))


# A monomial is a sorted tuple of (variable index, exponent) pairs, exponent >= 1.
Monomial = tuple


def monomial(exponents: dict[int, int] | Iterable[tuple[int, int]]) -> Monomial:
    items = exponents.items() if isinstance(exponents, dict) else exponents
    merged: dict[int, int] = {}
    for var, exp in items:
        merged[var] = merged.get(var, 0) + exp
    if any(e < 1 for e in merged.values()):
        raise ValueError("monomial exponents must be positive")
    return tuple(sorted(merged.items()))


def degree(mon: Monomial) -> int:
    return sum(e for _, e in mon)


@dataclass(frozen=True)
class Term:
    coefficient: Coefficient
    monomial: Monomial = ()

    def __post_init__(self):
        if not self.coefficient:
            raise ValueError("stored terms must have a nonzero coefficient")

    @property
    def degree(self) -> int:
        return degree(self.monomial)


@dataclass(frozen=True)
class PolySystem:
    """Polynomials as tuples of terms over ``dimension`` variables."""

    dimension: int
    polynomials: tuple[tuple[Term, ...], ...]
    degrees: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        polys = tuple(tuple(p) for p in self.polynomials)
        object.__setattr__(self, "polynomials", polys)
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not polys:
            raise ValueError("a system needs at least one polynomial")
        for i, poly in enumerate(polys):
            for term in poly:
                for var, _ in term.monomial:
                    if not 0 <= var < self.dimension:
                        raise ValueError(f"polynomial {i}: variable x{var} out of range for dimension {self.dimension}")
        object.__setattr__(self, "degrees", tuple(max((t.degree for t in p), default=0) for p in polys))

    @classmethod
    def from_terms(cls, dimension: int, polynomials: Iterable[Iterable[tuple]]) -> "PolySystem":
        """Build from ``[(coefficient, {var: exp}), ...]`` lists, merging like terms."""
        polys = []
        for poly in polynomials:
            polys.append(_merge_terms((Coefficient.of(c), monomial(m)) for c, m in poly))
        return cls(dimension, tuple(polys))

    def __len__(self) -> int:
        return len(self.polynomials)

    @property
    def n_monomials(self) -> int:
        return sum(len(p) for p in self.polynomials)

    def scaled(self, factor) -> "PolySystem":
        factor = Coefficient.of(factor)
        return PolySystem(self.dimension, tuple(tuple(Term(t.coefficient * factor, t.monomial) for t in p) for p in self.polynomials))

    def evaluate(self, point: Sequence[complex]) -> list[complex]:
        """Naive term-by-term evaluation in complex binary64."""
        out = []
        for poly in self.polynomials:
            acc = 0j
            for t in poly:
                val = complex(t.coefficient)
                for var, exp in t.monomial:
                    val *= point[var] ** exp
                acc += val
            out.append(acc)
        return out

    def __str__(self) -> str:
        return format_system(self)


def _merge_terms(pairs: Iterable[tuple[Coefficient, Monomial]]) -> tuple[Term, ...]:
    order: list[Monomial] = []
    acc: dict[Monomial, Coefficient] = {}
    for coeff, mon in pairs:
        if mon in acc:
            acc[mon] = acc[mon] + coeff
        else:
            order.append(mon)
            acc[mon] = coeff
    return tuple(Term(acc[m], m) for m in order if acc[m])


# ---------------------------------------------------------------------------
# term decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermInstruction:
    """Evaluation recipe for ``c * prod x_v^e_v``.

    ``positions`` is the product of distinct variables, ``base_exponents``
    the factor common to the value and every derivative, and
    ``deriv_multipliers[i] = e_i * c`` the constant applied to the
    derivative slot of ``positions[i]``.
    """

    coefficient: Coefficient
    base_exponents: tuple[tuple[int, int], ...]
    positions: tuple[int, ...]
    exponents: tuple[int, ...]
    deriv_multipliers: tuple[Coefficient, ...]
    poly: int | None = None

    @property
    def k(self) -> int:
        return len(self.positions)

    def recompose(self) -> Term:
        mon = monomial(list(self.base_exponents) + [(v, 1) for v in self.positions])
        return Term(self.coefficient, mon)


def decompose_term(term: Term, poly: int | None = None) -> TermInstruction:
    positions = tuple(v for v, _ in term.monomial)
    exps = tuple(e for _, e in term.monomial)
    base = tuple((v, e - 1) for v, e in term.monomial if e > 1)
    mults = tuple(term.coefficient * e for e in exps)
    return TermInstruction(term.coefficient, base, positions, exps, mults, poly)


# ---------------------------------------------------------------------------
# benchmark generator
# ---------------------------------------------------------------------------

def cyclic_system(n: int) -> PolySystem:
    """The cyclic n-roots system; polynomial k has degree k."""
    if n < 2:
        raise ValueError("cyclic_system needs n >= 2")
    one = Coefficient(Fraction(1))
    polys = []
    for k in range(1, n):
        terms = [Term(one, monomial({(i + j) % n: 1 for j in range(k)})) for i in range(n)]
        polys.append(tuple(terms))
    polys.append((Term(one, monomial({i: 1 for i in range(n)})), Term(-one, ())))
    return PolySystem(n, tuple(polys))


@dataclass(frozen=True)
class SystemStats:
    dimension: int
    n_polynomials: int
    n_monomials: int
    degrees: tuple[int, ...]
    total_degree: int


def system_stats(system: PolySystem) -> SystemStats:
    return SystemStats(
        system.dimension,
        len(system.polynomials),
        system.n_monomials,
        system.degrees,
        math.prod(system.degrees),
    )


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x(?P<idx>\d+))
  | (?P<op>[-+*^;(),])
  | (?P<minus>−)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> Iterator[tuple[str, str, int, int]]:
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise SystemSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup if m.lastgroup != "idx" else "var"
        if m.group("var") is not None:
            kind = "var"
        value = m.group(0)
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "minus":
            yield "op", "-", line, col
        elif kind not in ("ws", "comment"):
            yield kind, value, line, col
        pos = m.end()
    yield "eof", "", line, pos - line_start + 1


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.tok
        raise SystemSyntaxError(message, tok[2], tok[3])

    def expect(self, value: str):
        if self.tok[1] != value:
            self.fail(f"expected {value!r}, found {self.tok[1] or 'end of input'!r}")
        return self.take()

    def number(self) -> Fraction:
        if self.tok[0] != "num":
            self.fail(f"expected a number, found {self.tok[1] or 'end of input'!r}")
        return Fraction(self.take()[1])

    def signed_number(self) -> Fraction:
        sign = 1
        while self.tok[1] in "+-" and self.tok[0] == "op":
            if self.take()[1] == "-":
                sign = -sign
        return sign * self.number()

    def coefficient(self) -> Coefficient:
        if self.tok[1] == "(":
            self.take()
            re_part = self.signed_number()
            self.expect(",")
            im_part = self.signed_number()
            self.expect(")")
            return Coefficient(re_part, im_part)
        return Coefficient(self.number())

    def factor(self, dim: int) -> tuple[int, int]:
        tok = self.tok
        if tok[0] != "var":
            self.fail(f"expected a variable, found {tok[1] or 'end of input'!r}")
        self.take()
        var = int(tok[1][1:])
        if var >= dim:
            self.fail(f"variable x{var} out of range for dimension {dim}", tok)
        exp = 1
        if self.tok[1] == "^":
            self.take()
            etok = self.tok
            if etok[0] != "num" or not etok[1].isdigit():
                self.fail(f"exponent must be a positive integer, found {etok[1] or 'end of input'!r}")
            exp = int(self.take()[1])
            if exp < 1:
                self.fail("exponent must be a positive integer", etok)
        return var, exp

    def term(self, dim: int, sign: int) -> tuple[Coefficient, Monomial]:
        start = self.tok
        factors: list[tuple[int, int]] = []
        if self.tok[0] == "var":
            coeff = Coefficient(Fraction(1))
            factors.append(self.factor(dim))
        else:
            coeff = self.coefficient()
            if not coeff:
                self.fail("zero coefficient", start)
        while self.tok[1] == "*":
            self.take()
            factors.append(self.factor(dim))
        return (coeff if sign > 0 else -coeff), monomial(factors)

    def polynomial(self, dim: int) -> tuple[Term, ...]:
        pairs = []
        sign = 1
        if self.tok[1] in "+-" and self.tok[0] == "op":
            sign = -1 if self.take()[1] == "-" else 1
        pairs.append(self.term(dim, sign))
        while self.tok[1] in ("+", "-"):
            sign = -1 if self.take()[1] == "-" else 1
            pairs.append(self.term(dim, sign))
        self.expect(";")
        return _merge_terms(pairs)

    def system(self) -> PolySystem:
        tok = self.tok
        if tok[0] != "num" or not tok[1].isdigit():
            self.fail("first statement must be the dimension")
        dim = int(self.take()[1])
        if dim < 1:
            self.fail("dimension must be positive", tok)
        if self.tok[1] == ";":
            self.take()
        polys = []
        while self.tok[0] != "eof":
            polys.append(self.polynomial(dim))
        if not polys:
            self.fail("no polynomials")
        return PolySystem(dim, tuple(polys))


def parse_system(text: str) -> PolySystem:
    """Parse the system text format (see README for the grammar)."""
    return _Parser(text).system()


def _fraction_text(value: Fraction) -> str:
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        # terminating decimal: print exactly
        scale = max(twos, fives)
        digits = abs(value.numerator) * (10**scale // value.denominator)
        s = str(digits).rjust(scale + 1, "0")
        text = s if scale == 0 else f"{s[:-scale]}.{s[-scale:]}".rstrip("0").rstrip(".")
        return ("-" if value < 0 else "") + text
    from decimal import Decimal, localcontext

    with localcontext() as ctx:
        ctx.prec = 80
        return format(Decimal(value.numerator) / Decimal(value.denominator), "e")


def _term_text(term: Term, first: bool) -> str:
    c = term.coefficient
    factors = "*".join(f"x{v}" if e == 1 else f"x{v}^{e}" for v, e in term.monomial)
    if c.im == 0:
        sign = "-" if c.re < 0 else "+"
        mag = abs(c.re)
        if mag == 1 and factors:
            body = factors
        else:
            body = _fraction_text(mag) + ("*" + factors if factors else "")
        if first:
            return body if sign == "+" else "- " + body
        return f" {sign} {body}"
    body = f"({_fraction_text(c.re)},{_fraction_text(c.im)})" + ("*" + factors if factors else "")
    return body if first else " + " + body


def format_system(system: PolySystem) -> str:
    lines = [str(system.dimension)]
    for poly in system.polynomials:
        lines.append("".join(_term_text(t, i == 0) for i, t in enumerate(poly)) + ";")
    return "\n".join(lines) + "\n"
