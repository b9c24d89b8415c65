"""Linear homotopies with the gamma trick, start systems and start data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .polysys import Coefficient, PolySystem, Term, format_system, monomial, parse_system
from .xprec import ExtComplex, Precision

__all__ = [
    "HomotopyInstance",
    "StartData",
    "TotalDegreeStarts",
    "ListStarts",
    "StartFileError",
    "make_homotopy",
    "random_gamma",
    "total_degree_start",
    "load_start_data",
    "parse_start_solutions",
    "write_start_data",
    "START_TOL",
]

log = logging.getLogger(__name__)

START_TOL = 1e-8


class StartFileError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class HomotopyInstance:
    """``gamma * (1 - t) * g(x) + t * f(x)`` at one precision level."""

    target: PolySystem
    start: PolySystem
    gamma: ExtComplex
    _plan: object = field(default=None, repr=False, compare=False)

    @property
    def prec(self) -> Precision:
        return self.gamma.prec

    @property
    def dimension(self) -> int:
        return self.target.dimension

    @property
    def plan(self):
        if self._plan is None:
            from .evaldiff import build_plan

            self._plan = build_plan(self)
        return self._plan


def make_homotopy(f: PolySystem, g: PolySystem, gamma, prec=None) -> HomotopyInstance:
    if f.dimension != g.dimension or len(f) != len(g):
        raise ValueError(
            f"target ({len(f)} polynomials in {f.dimension} variables) and start "
            f"({len(g)} in {g.dimension}) do not match"
        )
    if not isinstance(gamma, ExtComplex):
        prec = Precision.parse(prec or Precision.D)
        if isinstance(gamma, tuple):
            gamma = ExtComplex.from_parts(gamma[0], gamma[1], prec)
        else:
            gamma = ExtComplex.from_complex(complex(gamma), prec)
    elif prec is not None and Precision.parse(prec) is not gamma.prec:
        raise ValueError("gamma precision does not match the requested level")
    if gamma.shape != ():
        raise ValueError("gamma must be a scalar")
    modulus = abs(float(gamma.abs2()) - 1.0)
    if modulus > 1e-12:
        raise ValueError(f"gamma must have unit modulus (| |gamma|^2 - 1 | = {modulus:.3g})")
    return HomotopyInstance(f, g, gamma)


def random_gamma(seed: int, prec=Precision.D) -> ExtComplex:
    """``exp(i*theta)`` with theta uniform on [0, 2pi) from numpy's PCG64 stream for ``seed``.

    The double-precision ``cos``/``sin`` pair is renormalized in the working
    precision so the modulus is one to the level's roundoff.
    """
    prec = Precision.parse(prec)
    theta = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi)
    z = ExtComplex.from_complex(complex(math.cos(theta), math.sin(theta)), prec)
    return z / z.abs2().sqrt()


# ---------------------------------------------------------------------------
# start data
# ---------------------------------------------------------------------------

class StartData:
    """Indexed collection of start solutions; ``take`` returns columns ``(n, m)``."""

    provenance = "unknown"

    def __init__(self, dimension: int, prec: Precision):
        self.dimension = dimension
        self.prec = Precision.parse(prec)

    def __len__(self) -> int:
        raise NotImplementedError

    def take(self, indices) -> ExtComplex:
        raise NotImplementedError

    def __getitem__(self, index: int) -> ExtComplex:
        return self.take([index])[:, 0]

    def all(self) -> ExtComplex:
        return self.take(np.arange(len(self)))


class TotalDegreeStarts(StartData):
    """Tuples of roots of unity, enumerated lazily in lexicographic order.

    Index ``i`` maps to mixed-radix digits with the first coordinate most
    significant, so a contiguous index range is a reproducible sub-run.
    """

    provenance = "total-degree"

    def __init__(self, degrees, prec):
        super().__init__(len(degrees), prec)
        self.degrees = tuple(int(d) for d in degrees)
        self._roots = {d: _roots_of_unity(d, self.prec) for d in set(self.degrees)}

    def __len__(self) -> int:
        return math.prod(self.degrees)

    def digits(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self)):
            raise IndexError("start index out of range")
        out = np.empty((self.dimension, idx.size), dtype=np.int64)
        rem = idx.copy()
        for i in range(self.dimension - 1, -1, -1):
            d = self.degrees[i]
            out[i] = rem % d
            rem //= d
        return out

    def take(self, indices) -> ExtComplex:
        digits = self.digits(indices)
        out = ExtComplex.zeros((self.dimension, digits.shape[1]), self.prec)
        for i, d in enumerate(self.degrees):
            out[i] = self._roots[d][digits[i]]
        return out


class ListStarts(StartData):
    """Materialized start solutions (columns of an ``(n, m)`` ExtComplex)."""

    provenance = "file"

    def __init__(self, solutions: ExtComplex, lines=None, rejected=None):
        super().__init__(solutions.shape[0], solutions.prec)
        self.solutions = solutions
        self.lines = list(lines) if lines is not None else list(range(1, solutions.shape[1] + 1))
        self.rejected = list(rejected or [])

    def __len__(self) -> int:
        return self.solutions.shape[1]

    def take(self, indices) -> ExtComplex:
        return self.solutions[:, np.asarray(indices, dtype=np.int64)]


def _roots_of_unity(d: int, prec: Precision) -> ExtComplex:
    k = np.arange(d)
    approx = np.exp(2j * np.pi * k / d)
    z = ExtComplex.from_complex(approx, prec)
    for _ in range({1: 1, 2: 2, 4: 3}[prec.limbs]):
        # Newton on z^d - 1
        zpow = ExtComplex.ones(d, prec)
        for _ in range(d - 1):
            zpow = zpow * z
        z = z - (zpow * z - 1.0) / (zpow * float(d))
    # the real axis roots are exact
    z[0] = ExtComplex.ones((), prec)
    if d % 2 == 0:
        z[d // 2] = -ExtComplex.ones((), prec)
    return z


def total_degree_start(f: PolySystem, prec=Precision.D) -> tuple[PolySystem, TotalDegreeStarts]:
    """``g_i = x_i^{d_i} - 1`` with ``d_i = deg f_i`` and its root-of-unity solutions."""
    if len(f) != f.dimension:
        raise ValueError("total-degree start needs as many polynomials as variables")
    if any(d == 0 for d in f.degrees):
        raise ValueError("total-degree start needs every polynomial to have positive degree")
    one = Coefficient(Fraction(1))
    polys = [(Term(one, monomial({i: d})), Term(-one, ())) for i, d in enumerate(f.degrees)]
    g = PolySystem(f.dimension, tuple(polys))
    return g, TotalDegreeStarts(f.degrees, prec)


# ---------------------------------------------------------------------------
# start files
# ---------------------------------------------------------------------------

def parse_start_solutions(text: str, dimension: int, prec=Precision.D) -> tuple[ExtComplex, list[int]]:
    """Parse one solution per line as ``re,im`` pairs; returns columns and line numbers."""
    prec = Precision.parse(prec)
    re_vals, im_vals, lines = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.replace("(", " ").replace(")", " ").split(",")]
        parts = [p for p in parts if p]
        if len(parts) != 2 * dimension:
            raise StartFileError(f"expected {dimension} complex pairs, found {len(parts)} numbers", lineno)
        try:
            nums = [Fraction(p) for p in parts]
        except (ValueError, ZeroDivisionError):
            raise StartFileError(f"invalid number in {line!r}", lineno) from None
        re_vals.append(nums[0::2])
        im_vals.append(nums[1::2])
        lines.append(lineno)
    if not lines:
        return ExtComplex.zeros((dimension, 0), prec), []
    sols = ExtComplex.from_parts(np.array(re_vals, dtype=object).T, np.array(im_vals, dtype=object).T, prec)
    return sols, lines


def load_start_data(system_file, solutions_file, prec=Precision.D, start_tol: float = START_TOL):
    """Read a start system and its solutions; solutions with ``||g||_inf >= start_tol`` are rejected."""
    from .evaldiff import evaluate_system

    prec = Precision.parse(prec)
    g = parse_system(Path(system_file).read_text())
    sols, lines = parse_start_solutions(Path(solutions_file).read_text(), g.dimension, prec)
    if not lines:
        return g, ListStarts(sols, lines)
    values, _ = evaluate_system(g, sols)
    resid = np.max(values.abs_hi(), axis=0)
    ok = resid < start_tol
    rejected = []
    for line, r in zip(np.asarray(lines)[~ok], resid[~ok]):
        log.warning("start solution on line %d rejected: residual %.3g >= %.3g", line, r, start_tol)
        rejected.append((int(line), float(r)))
    keep = np.flatnonzero(ok)
    return g, ListStarts(sols[:, keep], [lines[i] for i in keep], rejected)


def format_start_solutions(solutions: ExtComplex, digits: int | None = None) -> str:
    """One line per column; ``digits=None`` writes every limb exactly."""
    rows = []
    for j in range(solutions.shape[1]):
        pairs = []
        for i in range(solutions.shape[0]):
            re, im = solutions[i, j].to_strings(digits)
            pairs.append(f"{re},{im}")
        rows.append(", ".join(pairs))
    return "\n".join(rows) + ("\n" if rows else "")


def write_start_data(system_file, solutions_file, g: PolySystem, starts: StartData, indices=None, digits=None) -> None:
    idx = np.arange(len(starts)) if indices is None else np.asarray(indices)
    Path(system_file).write_text(format_system(g))
    Path(solutions_file).write_text(format_start_solutions(starts.take(idx), digits))
