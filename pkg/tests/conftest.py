"""Shared oracles: exact rationals for extended values, a naive exact evaluator, random systems."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from homotrack.polysys import Coefficient, PolySystem, Term, monomial
from homotrack.xprec import ExtComplex, ExtReal, Precision

LEVELS = [Precision.D, Precision.DD, Precision.QD]


def exact(x: ExtReal) -> list[Fraction]:
    """Exact value of every element, flattened in C order."""
    limbs = x.limbs.reshape(-1, x.limbs.shape[-1])
    return [sum((Fraction(float(v)) for v in row), Fraction(0)) for row in limbs]


def exact_c(z: ExtComplex) -> list[tuple[Fraction, Fraction]]:
    return list(zip(exact(z.re), exact(z.im)))


def rel_err(got: Fraction, want: Fraction) -> float:
    if want == 0:
        return float(abs(got))
    return float(abs((got - want) / want))


def cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def cpow(a, e):
    out = (Fraction(1), Fraction(0))
    for _ in range(e):
        out = cmul(out, a)
    return out


def naive_eval(system: PolySystem, point) -> list[tuple[Fraction, Fraction]]:
    """Term-by-term exact evaluation at a point of ``(re, im)`` Fractions."""
    out = []
    for poly in system.polynomials:
        acc = (Fraction(0), Fraction(0))
        for t in poly:
            val = (t.coefficient.re, t.coefficient.im)
            for var, e in t.monomial:
                val = cmul(val, cpow(point[var], e))
            acc = (acc[0] + val[0], acc[1] + val[1])
        out.append(acc)
    return out


def naive_jacobian(system: PolySystem, point) -> list[list[tuple[Fraction, Fraction]]]:
    """Exact partial derivatives by differentiating each term symbolically."""
    n = system.dimension
    rows = []
    for poly in system.polynomials:
        row = []
        for v in range(n):
            acc = (Fraction(0), Fraction(0))
            for t in poly:
                exps = dict(t.monomial)
                if v not in exps:
                    continue
                val = (t.coefficient.re * exps[v], t.coefficient.im * exps[v])
                for var, e in t.monomial:
                    val = cmul(val, cpow(point[var], e - 1 if var == v else e))
                acc = (acc[0] + val[0], acc[1] + val[1])
            row.append(acc)
        rows.append(row)
    return rows


def random_rational(rng, bits: int = 20) -> Fraction:
    return Fraction(int(rng.integers(-(2**bits), 2**bits)), int(rng.integers(1, 2**bits)))


def random_system(rng, n: int, max_degree: int, max_terms: int) -> PolySystem:
    """Square system with random rational complex coefficients."""
    polys = []
    for _ in range(n):
        terms: dict = {}
        for _ in range(int(rng.integers(1, max_terms + 1))):
            deg = int(rng.integers(0, max_degree + 1))
            exps: dict[int, int] = {}
            for _ in range(deg):
                v = int(rng.integers(0, n))
                exps[v] = exps.get(v, 0) + 1
            mon = monomial(exps)
            c = Coefficient(random_rational(rng, 8), random_rational(rng, 8))
            if c:
                terms[mon] = c
        if not terms:
            terms[()] = Coefficient(Fraction(1))
        polys.append(tuple(Term(c, m) for m, c in terms.items()))
    return PolySystem(n, tuple(polys))


def random_point(rng, n: int, prec) -> tuple[ExtComplex, list]:
    """Random point exactly representable at ``prec``; returns it and its exact coordinates."""
    re = [random_rational(rng, 12) for _ in range(n)]
    im = [random_rational(rng, 12) for _ in range(n)]
    x = ExtComplex.from_parts(np.array(re, dtype=object)[:, None], np.array(im, dtype=object)[:, None], prec)
    coords = exact_c(x)
    return x, coords


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (verdict, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {verdict}  {detail}")
