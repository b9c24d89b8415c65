from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import LEVELS, cmul, exact_c, naive_eval, naive_jacobian, random_point, random_system
from homotrack.evaldiff import (
    BatchWorkspace,
    build_plan,
    eval_coefficients,
    eval_monomials,
    eval_system_batch,
    evaluate_system,
    speelpenning,
    sum_batch,
)
from homotrack.homotopy import make_homotopy, random_gamma, total_degree_start
from homotrack.polysys import cyclic_system, parse_system
from homotrack.xprec import ExtComplex, ExtReal, Precision


@pytest.mark.parametrize("k", range(1, 12))
def test_speelpenning_multiplication_count(k):
    trace = []
    speelpenning(list(range(1, k + 1)), trace=trace)
    assert len(trace) == {1: 0, 2: 1}.get(k, 3 * k - 5)


@pytest.mark.parametrize("k", range(1, 9))
def test_speelpenning_symbolic(k):
    xs = sympy.symbols(f"x0:{k}")
    value, derivs = speelpenning(list(xs))
    prod = sympy.Mul(*xs)
    assert sympy.expand(value - prod) == 0
    for j, d in enumerate(derivs):
        d = 1 if d is None else d
        assert sympy.expand(d - sympy.diff(prod, xs[j])) == 0


def test_speelpenning_four_variable_schedule():
    x0, x1, x2, x3 = sympy.symbols("x0:4")
    trace = []
    value, derivs = speelpenning([x0, x1, x2, x3], trace=trace)
    products = [sympy.expand(a * b) for a, b in trace]
    assert products == [x0 * x1, x0 * x1 * x2, x0 * x1 * x2 * x3, x0 * x1 * x3, x2 * x3, x0 * x2 * x3, x1 * x2 * x3]
    assert [value] + derivs == [x0 * x1 * x2 * x3, x1 * x2 * x3, x0 * x2 * x3, x0 * x1 * x3, x0 * x1 * x2]


def test_tape_multiplications_match_term_structure():
    f = cyclic_system(6)
    h = make_homotopy(f, f, 1.0)
    plan = h.plan
    want = sum({0: 0, 1: 0, 2: 1}.get(ins.k, 3 * ins.k - 5) for ins in plan.instructions)
    assert plan.n_mults == want


def test_plan_merges_supports_in_order():
    f = cyclic_system(10)
    g, _ = total_degree_start(f)
    plan = make_homotopy(f, g, 1.0).plan
    # x0 and the constant of the last polynomial are shared by both systems
    assert plan.n_terms == 92 + 20 - 2
    polys = plan.polys
    assert np.all(np.diff(polys) >= 0)
    first = [ins.positions for ins in plan.instructions if ins.poly == 1]
    assert first[:10] == [tuple(sorted({i, (i + 1) % 10})) for i in range(10)]
    assert first[10:] == [(1,), ()]  # start-only x1^2 and -1


@pytest.mark.parametrize("prec", LEVELS)
def test_values_and_jacobian_against_exact_oracle(rng, prec):
    tol = {Precision.D: 1e-12, Precision.DD: 1e-27, Precision.QD: 1e-57}[prec]
    for _ in range(15):
        n = int(rng.integers(1, 5))
        f = random_system(rng, n, 4, 8)
        x, coords = random_point(rng, n, prec)
        values, jac = evaluate_system(f, x)
        want_v = naive_eval(f, coords)
        want_j = naive_jacobian(f, coords)
        got_v = exact_c(values)
        scale = max(max(abs(a), abs(b)) for a, b in want_v) or Fraction(1)
        for g, w in zip(got_v, want_v):
            assert float(max(abs(g[0] - w[0]), abs(g[1] - w[1])) / scale) <= tol
        got_j = exact_c(jac)
        flat_w = [e for row in want_j for e in row]
        scale = max(max(abs(a), abs(b)) for a, b in flat_w) or Fraction(1)
        for g, w in zip(got_j, flat_w):
            assert float(max(abs(g[0] - w[0]), abs(g[1] - w[1])) / scale) <= tol


def test_jacobian_against_central_differences(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        f = random_system(rng, n, 4, 10)
        x0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = ExtComplex.from_complex(x0[:, None], "d")
        _, jac = evaluate_system(f, x)
        jac = jac.to_complex()[:, :, 0]
        fd = np.empty((n, n), dtype=complex)
        step = 1e-6
        for v in range(n):
            e = np.zeros(n)
            e[v] = step
            plus = np.array(f.evaluate(x0 + e))
            minus = np.array(f.evaluate(x0 - e))
            fd[:, v] = (plus - minus) / (2 * step)
        assert np.max(np.abs(jac - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_homotopy_values_match_definition(rng):
    f = random_system(rng, 3, 3, 6)
    g, _ = total_degree_start(f)
    prec = Precision.DD
    gamma = random_gamma(5, prec)
    h = make_homotopy(f, g, gamma)
    x, coords = random_point(rng, 3, prec)
    t = Fraction(3, 8)
    values, _ = eval_system_batch(h.plan, gamma, x, float(t))
    gv = naive_eval(g, coords)
    fv = naive_eval(f, coords)
    gm = exact_c(gamma.reshape(1)) if hasattr(gamma, "reshape") else [(gamma.re.to_fraction(), gamma.im.to_fraction())]
    for got, a, b in zip(exact_c(values), gv, fv):
        ga = cmul(gm[0], a)
        want = (ga[0] * (1 - t) + b[0] * t, ga[1] * (1 - t) + b[1] * t)
        assert abs(float(got[0] - want[0])) < 1e-28 * max(1, abs(float(want[0])))
        assert abs(float(got[1] - want[1])) < 1e-28 * max(1, abs(float(want[1])))


@pytest.mark.parametrize("prec", LEVELS)
def test_batch_columns_are_independent(rng, prec):
    f = cyclic_system(5)
    g, _ = total_degree_start(f)
    h = make_homotopy(f, g, random_gamma(1, prec))
    pts = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    x = ExtComplex.from_complex(pts, prec)
    ts = ExtReal.from_float(rng.uniform(0, 1, 7), prec)
    values, jac = eval_system_batch(h.plan, h.gamma, x, ts)
    ws = BatchWorkspace(h.plan)
    for j in range(7):
        v1, j1 = eval_system_batch(h.plan, h.gamma, x[:, j : j + 1], ts[j : j + 1], ws)
        assert np.array_equal(v1.re.limbs[:, 0], values.re.limbs[:, j])
        assert np.array_equal(j1.im.limbs[:, :, 0], jac.im.limbs[:, :, j])


def test_stages_and_timings():
    f = parse_system("2\nx0^3*x1 - 2;\nx0 + x1^2;")
    g, _ = total_degree_start(f)
    h = make_homotopy(f, g, 1.0, "qd")
    plan = h.plan
    ws = BatchWorkspace(plan)
    x = ExtComplex.from_complex(np.array([[2.0], [3.0]]), "qd")
    t = ExtReal.from_float(np.array([1.0]), "qd")
    coeff = eval_coefficients(plan, h.gamma, t, ws)
    assert coeff.shape == (plan.n_terms, 1)
    mon = eval_monomials(plan, x, ws)
    assert mon.shape == (plan.n_rows, 1)
    # x0^3*x1: value 24, d/dx0 slot 3*x0^2*x1 / 3 = 12, d/dx1 slot 8
    first = plan.instructions[0]
    assert first.positions == (0, 1)
    assert complex(mon[plan.value_row[0], 0]) == 24
    assert [complex(mon[r, 0]) for r in plan.deriv_rows[0]] == [12, 8]
    values, jac = sum_batch(plan, coeff, mon, ws)
    assert values.to_complex()[:, 0].tolist() == [22, 11]
    assert jac.to_complex()[:, :, 0].tolist() == [[36, 8], [1, 6]]
    eval_system_batch(plan, h.gamma, x, 1.0, ws)
    assert all(v > 0 for v in ws.timings.values())
    ws.reset_timings()
    assert all(v == 0 for v in ws.timings.values())


def test_plan_and_workspace_errors():
    f = parse_system("1\nx0 - 1;")
    h = make_homotopy(f, f, 1.0)
    other = make_homotopy(f, f, 1.0)
    ws = BatchWorkspace(other.plan)
    with pytest.raises(ValueError):
        eval_system_batch(h.plan, h.gamma, ExtComplex.zeros((1, 1)), 0.0, ws)
    with pytest.raises(ValueError):
        eval_system_batch(h.plan, h.gamma, ExtComplex.zeros((1, 1), "dd"), 0.0)
    g = parse_system("2\nx0;\nx1;")
    with pytest.raises(ValueError):
        build_plan(type(h)(f, g, h.gamma))
