"""Batched evaluation and differentiation of a homotopy.

Three compiled stages run over all path columns at once:

1. coefficients ``c(t) = gamma (1 - t) c_g + t c_f`` for every term,
2. monomials: a straight-line tape of complex products fills a row buffer
   with each term's value and partial derivatives (prefix/suffix products
   over the distinct variables, times the common factor ``prod x^(e-1)``),
3. sums into the polynomial values and the Jacobian.

The tape is built once per plan; repeated powers are shared between terms.
Buffers are laid out ``(row, path, limb)`` and reused through a
:class:`BatchWorkspace`."""

from __future__ import annotations

import operator
import time
from dataclasses import dataclass, field

import numpy as np

from .polysys import Coefficient, PolySystem, TermInstruction, decompose_term
from . import _evalkernels as _ek
from .xprec import ExtComplex, ExtReal, Precision

__all__ = [
    "EvalPlan",
    "BatchWorkspace",
    "build_plan",
    "speelpenning",
    "eval_coefficients",
    "eval_monomials",
    "sum_batch",
    "eval_system_batch",
    "evaluate_system",
]


def speelpenning(xs, mul=operator.mul, trace=None):
    """Value and partial derivatives of ``xs[0] * ... * xs[k-1]``.

    Prefix products give the value, one suffix product is carried down to
    form the remaining derivatives; ``3k - 5`` multiplications for ``k >= 3``.
    Returns ``(value, derivs)``; a derivative equal to the empty product is
    returned as ``None``.  ``trace`` (a list) receives ``(left, right)`` for
    every multiplication in execution order.
    """
    k = len(xs)

    def times(a, b):
        if trace is not None:
            trace.append((a, b))
        return mul(a, b)

    if k == 0:
        return None, []
    if k == 1:
        return xs[0], [None]
    prefix = [xs[0]]
    for j in range(1, k):
        prefix.append(times(prefix[-1], xs[j]))
    derivs = [None] * k
    derivs[k - 1] = prefix[k - 2]
    if k == 2:
        derivs[0] = xs[1]
        return prefix[-1], derivs
    derivs[k - 2] = times(prefix[k - 3], xs[k - 1])
    suffix = xs[k - 1]
    for j in range(k - 3, 0, -1):
        suffix = times(xs[j + 1], suffix)
        derivs[j] = times(prefix[j - 1], suffix)
    derivs[0] = times(xs[1], suffix)
    return prefix[-1], derivs


@dataclass
class EvalPlan:
    """Flattened instructions for one homotopy at one precision level.

    Monomial values and derivatives live in a row buffer: rows ``0..n-1``
    hold the point, row ``n`` the constant one, and every tape entry
    ``(dst, a, b)`` appends the product of two earlier rows.
    """

    dimension: int
    n_polys: int
    prec: Precision
    instructions: tuple[TermInstruction, ...]
    polys: np.ndarray
    c_target: ExtComplex
    c_start: ExtComplex
    tape: np.ndarray  # (n_mults, 3)
    value_row: np.ndarray  # buffer row of each term's value
    deriv_rows: tuple[np.ndarray, ...]  # buffer rows of each term's partials, by position
    n_rows: int
    # sum stage: contribution c is coeff[contrib_term[c]] * buf[contrib_row[c]] * contrib_mult[c]
    contrib_term: np.ndarray
    contrib_row: np.ndarray
    contrib_mult: np.ndarray
    value_gather: np.ndarray  # (n_polys, width) contribution indices, -1 padded
    jac_gather: np.ndarray  # (n_polys * dimension, width)
    _scaled: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_terms(self) -> int:
        return len(self.instructions)

    @property
    def n_mults(self) -> int:
        return len(self.tape)

    def scaled_start(self, gamma: ExtComplex):
        """Limbs of ``gamma * c_g``, cached per gamma value."""
        key = gamma.re.limbs.tobytes() + gamma.im.limbs.tobytes()
        hit = self._scaled.get(key)
        if hit is None:
            g = self.c_start * gamma
            hit = (np.ascontiguousarray(g.re.limbs), np.ascontiguousarray(g.im.limbs))
            self._scaled[key] = hit
        return hit


def _exact_parts(coeffs: list[Coefficient], prec: Precision) -> ExtComplex:
    if not coeffs:
        return ExtComplex.zeros((0,), prec)
    return ExtComplex.from_parts([c.re for c in coeffs], [c.im for c in coeffs], prec)


class _TapeBuilder:
    def __init__(self, n: int):
        self.n = n
        self.rows = n + 1
        self.ops: list[tuple[int, int, int]] = []
        self.powers: dict[tuple[int, int], int] = {}

    def mul(self, a: int, b: int) -> int:
        self.ops.append((self.rows, a, b))
        self.rows += 1
        return self.rows - 1

    def power(self, v: int, p: int) -> int:
        key = (v, p)
        if key not in self.powers:
            result, base = None, v
            while p:
                if p & 1:
                    result = base if result is None else self.mul(result, base)
                p >>= 1
                if p:
                    base = self.mul(base, base)
            self.powers[key] = result
        return self.powers[key]

    def term(self, ins: TermInstruction):
        one = self.n
        if ins.k == 0:
            return one, []
        value, derivs = speelpenning(list(ins.positions), self.mul)
        derivs = [one if d is None else d for d in derivs]
        if ins.base_exponents:
            base = self.power(*ins.base_exponents[0])
            for pair in ins.base_exponents[1:]:
                base = self.mul(base, self.power(*pair))
            value = self.mul(value, base)
            derivs = [self.mul(d, base) for d in derivs]
        return value, derivs


def build_plan(h, prec=None) -> EvalPlan:
    """Merge the supports of target and start into one instruction list.

    Order is polynomial-major; within a polynomial the target's terms come
    first in source order, then start-only terms in their source order.
    A coefficient missing from one side is stored as an exact zero.
    """
    f, g = h.target, h.start
    if f.dimension != g.dimension or len(f) != len(g):
        raise ValueError("target and start systems differ in shape")
    prec = Precision.parse(prec or h.prec)
    zero = Coefficient(0)
    instructions, cf, cg = [], [], []
    for i, (pf, pg) in enumerate(zip(f.polynomials, g.polynomials)):
        start_coeff = {t.monomial: t.coefficient for t in pg}
        seen = set()
        for t in pf:
            instructions.append(decompose_term(t, i))
            cf.append(t.coefficient)
            cg.append(start_coeff.get(t.monomial, zero))
            seen.add(t.monomial)
        for t in pg:
            if t.monomial in seen:
                continue
            instructions.append(decompose_term(t, i))
            cf.append(zero)
            cg.append(t.coefficient)

    n = f.dimension
    tb = _TapeBuilder(n)
    value_row = np.empty(len(instructions), dtype=np.int64)
    deriv_rows = []
    for idx, ins in enumerate(instructions):
        value, derivs = tb.term(ins)
        value_row[idx] = value
        deriv_rows.append(np.array(derivs, dtype=np.int64))

    # sum-stage contributions, kept in plan order within each output
    c_term, c_row, c_mult = [], [], []
    value_lists = [[] for _ in range(len(f))]
    jac_lists = [[] for _ in range(len(f) * n)]
    for idx, ins in enumerate(instructions):
        value_lists[ins.poly].append(len(c_term))
        c_term.append(idx)
        c_row.append(value_row[idx])
        c_mult.append(1.0)
        for pos, (var, exp) in enumerate(zip(ins.positions, ins.exponents)):
            jac_lists[ins.poly * n + var].append(len(c_term))
            c_term.append(idx)
            c_row.append(deriv_rows[idx][pos])
            c_mult.append(float(exp))

    def gather(lists):
        width = max((len(x) for x in lists), default=0)
        out = np.full((len(lists), max(width, 1)), -1, dtype=np.int64)
        for r, lst in enumerate(lists):
            out[r, : len(lst)] = lst
        return out

    return EvalPlan(
        dimension=n,
        n_polys=len(f),
        prec=prec,
        instructions=tuple(instructions),
        polys=np.array([ins.poly for ins in instructions], dtype=np.int64),
        c_target=_exact_parts(cf, prec),
        c_start=_exact_parts(cg, prec),
        tape=np.array(tb.ops, dtype=np.int64).reshape(-1, 3),
        value_row=value_row,
        deriv_rows=tuple(deriv_rows),
        n_rows=tb.rows,
        contrib_term=np.array(c_term, dtype=np.int64),
        contrib_row=np.array(c_row, dtype=np.int64),
        contrib_mult=np.array(c_mult),
        value_gather=gather(value_lists),
        jac_gather=gather(jac_lists),
    )


class BatchWorkspace:
    """Stage buffers reused across calls, one set per batch width seen."""

    def __init__(self, plan: EvalPlan, width: int = 0):
        self.plan = plan
        self.width = width
        self.timings = {"coeff": 0.0, "mon": 0.0, "sum": 0.0}
        self._sets: dict[int, dict[str, np.ndarray]] = {}

    def arrays(self, b: int) -> dict[str, np.ndarray]:
        got = self._sets.get(b)
        if got is None:
            p, L = self.plan, self.plan.prec.limbs
            shapes = {
                "coeff": (p.n_terms, b, L),
                "buf": (p.n_rows, b, L),
                "prod": (len(p.contrib_term), L),
                "val": (p.n_polys, b, L),
                "jac": (p.n_polys * p.dimension, b, L),
            }
            got = {}
            for key, shape in shapes.items():
                got[key + "_re"] = np.zeros(shape)
                got[key + "_im"] = np.zeros(shape)
            self._sets[b] = got
        return got

    def reset_timings(self) -> None:
        for key in self.timings:
            self.timings[key] = 0.0


def _workspace(plan: EvalPlan, ws: BatchWorkspace | None) -> BatchWorkspace:
    if ws is None:
        return BatchWorkspace(plan)
    if ws.plan is not plan:
        raise ValueError("workspace belongs to another plan")
    return ws


def _complex(re: np.ndarray, im: np.ndarray) -> ExtComplex:
    return ExtComplex(ExtReal(re), ExtReal(im))


def _limbs(x: ExtReal) -> np.ndarray:
    return np.ascontiguousarray(x.limbs)


def eval_coefficients(plan: EvalPlan, gamma: ExtComplex, t: ExtReal, ws: BatchWorkspace | None = None) -> ExtComplex:
    """``coeff[term, j] = gamma (1 - t_j) c_g + t_j c_f``, shape ``(n_terms, B)``."""
    ws = _workspace(plan, ws)
    a = ws.arrays(t.shape[0])
    gr, gi = plan.scaled_start(gamma)
    _ek.coefficients(gr, gi, plan.c_target.re.limbs, plan.c_target.im.limbs, _limbs(t), a["coeff_re"], a["coeff_im"])
    return _complex(a["coeff_re"], a["coeff_im"])


def eval_monomials(plan: EvalPlan, points: ExtComplex, ws: BatchWorkspace | None = None) -> ExtComplex:
    """Run the tape for ``points`` of shape ``(n, B)``; returns the ``(n_rows, B)`` buffer."""
    ws = _workspace(plan, ws)
    a = ws.arrays(points.shape[1])
    _ek.run_tape(_limbs(points.re), _limbs(points.im), plan.tape, a["buf_re"], a["buf_im"])
    return _complex(a["buf_re"], a["buf_im"])


def sum_batch(plan: EvalPlan, coeff: ExtComplex, monvals: ExtComplex, ws: BatchWorkspace | None = None):
    """Assemble values ``(n_polys, B)`` and Jacobians ``(n_polys, n, B)`` in plan order."""
    ws = _workspace(plan, ws)
    b = coeff.shape[1]
    a = ws.arrays(b)
    _ek.sum_terms(
        _limbs(coeff.re), _limbs(coeff.im), _limbs(monvals.re), _limbs(monvals.im),
        plan.contrib_term, plan.contrib_row, plan.contrib_mult, plan.value_gather, plan.jac_gather,
        a["prod_re"], a["prod_im"], a["val_re"], a["val_im"], a["jac_re"], a["jac_im"],
    )
    shape = (plan.n_polys, plan.dimension, b, plan.prec.limbs)
    return (
        _complex(a["val_re"], a["val_im"]),
        _complex(a["jac_re"].reshape(shape), a["jac_im"].reshape(shape)),
    )


def eval_system_batch(plan: EvalPlan, gamma: ExtComplex, points: ExtComplex, t, ws: BatchWorkspace | None = None):
    """Run the three stages; returns ``(values, jacobian)`` for every column of ``points``.

    ``t`` is an ExtReal of shape ``(B,)`` or anything broadcastable to floats.
    """
    b = points.shape[1]
    if points.prec is not plan.prec:
        raise ValueError("points and plan use different precision levels")
    if not isinstance(t, ExtReal):
        t = ExtReal.from_float(np.broadcast_to(np.asarray(t, dtype=float), (b,)), plan.prec)
    ws = _workspace(plan, ws)
    t0 = time.perf_counter()
    coeff = eval_coefficients(plan, gamma, t, ws)
    t1 = time.perf_counter()
    monvals = eval_monomials(plan, points, ws)
    t2 = time.perf_counter()
    values, jac = sum_batch(plan, coeff, monvals, ws)
    t3 = time.perf_counter()
    ws.timings["coeff"] += t1 - t0
    ws.timings["mon"] += t2 - t1
    ws.timings["sum"] += t3 - t2
    return values.copy(), jac.copy()


def evaluate_system(system: PolySystem, points: ExtComplex):
    """Values and Jacobians of a plain system at the columns of ``points``."""
    from .homotopy import make_homotopy

    prec = points.prec
    h = make_homotopy(system, system, ExtComplex.ones((), prec))
    return eval_system_batch(h.plan, h.gamma, points, 1.0)
