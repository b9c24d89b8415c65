"""Lockstep batch predictor-corrector path tracking.

A batch of ``B`` paths is stored as structure-of-arrays.  Every round the
active columns are predicted, corrected together (columns that converge
early stop issuing work), checked, and compacted so the active columns stay
contiguous at the front.  All arithmetic is columnwise, so a path's
trajectory does not depend on which other paths share its batch.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Iterator

import numpy as np

from .evaldiff import BatchWorkspace, eval_system_batch
from .homotopy import HomotopyInstance, StartData
from .linalg import least_squares_batch
from .xprec import ExtComplex, ExtReal, Precision, concatenate, stack, where

__all__ = [
    "Status",
    "TrackConfig",
    "PathState",
    "PathBatch",
    "NewtonResult",
    "PathResult",
    "SolutionSet",
    "predict",
    "lagrange_predict",
    "newton_correct",
    "step_control",
    "check_status",
    "growth_exponent",
    "compact",
    "track_batch",
    "track_all",
]

log = logging.getLogger(__name__)

HISTORY = 5

_TOL = {Precision.D: 1e-8, Precision.DD: 1e-14, Precision.QD: 1e-28}
_H_MIN = {Precision.D: 1e-6, Precision.DD: 1e-8, Precision.QD: 1e-8}


class Status(enum.IntEnum):
    FAILED = -1
    ACTIVE = 0
    SUCCESS = 1


@dataclass
class TrackConfig:
    """Tracking parameters; tolerances and ``h_min`` default per precision."""

    prec: Precision = Precision.D
    residual_tol: float | None = None
    update_tol: float | None = None
    max_newton: int = 3
    h_init: float = 0.05
    h_min: float | None = None
    h_max: float = 0.1
    expand: float = 1.5
    expand_after: int = 2
    contract: float = 0.5
    divergence_bound: float = 1e8
    divergence_exponent: float = 0.1
    max_steps: int = 10_000
    batch_size: int = 64
    refine_iterations: int = 3
    workers: int = 1

    def __post_init__(self):
        self.prec = Precision.parse(self.prec)
        if self.residual_tol is None:
            self.residual_tol = _TOL[self.prec]
        if self.update_tol is None:
            self.update_tol = _TOL[self.prec]
        if self.h_min is None:
            self.h_min = _H_MIN[self.prec]
        self.validate()

    def validate(self) -> None:
        if not (0.0 < self.h_min <= self.h_init <= self.h_max <= 0.1):
            raise ValueError(
                f"need 0 < h_min <= h_init <= h_max <= 0.1, got "
                f"h_min={self.h_min}, h_init={self.h_init}, h_max={self.h_max}"
            )
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")
        if self.residual_tol <= 0 or self.update_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (self.expand >= 1.0 and 0.0 < self.contract < 1.0):
            raise ValueError("need expand >= 1 and 0 < contract < 1")
        if self.expand_after < 1 or self.batch_size < 1 or self.workers < 1 or self.max_steps < 1:
            raise ValueError("expand_after, batch_size, workers and max_steps must be positive")
        if self.refine_iterations < 0 or self.divergence_bound <= 0:
            raise ValueError("refine_iterations must be >= 0 and divergence_bound > 0")


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class PathState:
    """One path, as seen by the per-path operations."""

    x: ExtComplex
    t: float = 0.0
    h: float = 0.05
    hist_t: list = field(default_factory=list)
    hist_x: list = field(default_factory=list)
    status: Status = Status.ACTIVE
    steps: int = 0
    newton_iterations: int = 0
    rejections: int = 0
    successes: int = 0
    annotation: str = ""

    @classmethod
    def start(cls, x: ExtComplex, h: float = 0.05) -> "PathState":
        return cls(x=x.copy(), h=h, hist_t=[0.0], hist_x=[x.copy()])


class PathBatch:
    """Structure-of-arrays over ``B`` paths; slots ``[0, active_count)`` are active.

    History slot 0 is the most recent accepted sample.  ``path_id`` maps each
    slot to the original path id.
    """

    _COLUMN_ARRAYS = ("t", "h", "hist_t", "count", "status", "steps", "newton", "rejections",
                      "successes", "path_id", "annotation", "residual")

    def __init__(self, x0: ExtComplex, path_id, cfg: TrackConfig, plan):
        n, b = x0.shape
        self.n = n
        self.width = b
        self.x = x0.copy()
        self.t = np.zeros(b)
        self.h = np.full(b, float(cfg.h_init))
        self.hist_t = np.zeros((HISTORY, b))
        self.hist_x = ExtComplex.zeros((HISTORY, n, b), x0.prec)
        self.hist_x[0] = x0
        self.count = np.ones(b, dtype=np.int64)
        self.status = np.zeros(b, dtype=np.int64)
        self.steps = np.zeros(b, dtype=np.int64)
        self.newton = np.zeros(b, dtype=np.int64)
        self.rejections = np.zeros(b, dtype=np.int64)
        self.successes = np.zeros(b, dtype=np.int64)
        self.path_id = np.asarray(path_id, dtype=np.int64).copy()
        self.annotation = np.full(b, "", dtype=object)
        self.residual = np.full(b, np.nan)
        self.active_count = b
        self.rounds = 0
        self.workspace = BatchWorkspace(plan, b)

    def permute(self, order: np.ndarray) -> None:
        """Reorder the first ``len(order)`` slots by ``order``."""
        k = len(order)
        for name in self._COLUMN_ARRAYS:
            arr = getattr(self, name)
            arr[..., :k] = arr[..., order]
        self.x[:, :k] = self.x[:, order]
        self.hist_x[:, :, :k] = self.hist_x[:, :, order]


# ---------------------------------------------------------------------------
# predictor
# ---------------------------------------------------------------------------

def lagrange_predict(hist_t: np.ndarray, hist_x: ExtComplex, count: np.ndarray, t_next) -> ExtComplex:
    """Extrapolate through the ``count`` most recent samples of every column.

    ``hist_t`` is ``(K, B)``, ``hist_x`` is ``(K, n, B)`` with slot 0 newest.
    Weights are computed in the working precision; ``count == 1`` returns the
    last sample unchanged.
    """
    prec = hist_x.prec
    k_max, b = hist_t.shape
    count = np.asarray(count)
    ts = ExtReal.from_float(hist_t, prec)
    tn = ExtReal.from_float(np.broadcast_to(np.asarray(t_next, dtype=float), (b,)), prec)
    valid = np.arange(k_max)[:, None] < count[None, :]
    num = ExtReal.from_float(np.ones((k_max, b)), prec)
    den = ExtReal.from_float(np.ones((k_max, b)), prec)
    for m in range(k_max):
        use = valid & valid[m] & (np.arange(k_max)[:, None] != m)
        num = where(use, num * (tn - ts[m]), num)
        den = where(use, den * (ts - ts[m]), den)
    w = num / den
    w = where(valid, w, ExtReal.zeros((k_max, b), prec))
    out = hist_x[0] * w[0]
    for j in range(1, k_max):
        if np.any(valid[j]):
            out = out + hist_x[j] * w[j]
    return out


def predict(p: PathState, t_next: float) -> ExtComplex:
    """Lagrange extrapolation of one path through its (up to five) latest samples."""
    if not p.hist_t:
        raise ValueError("path has no history")
    if t_next <= p.hist_t[0]:
        raise ValueError("prediction target must lie ahead of the last sample")
    k = min(HISTORY, len(p.hist_t))
    hist_t = np.array(p.hist_t[:k])[:, None]
    hist_x = stack(list(p.hist_x[:k]))[..., None]
    return lagrange_predict(hist_t, hist_x, np.array([k]), t_next)[:, 0]


# ---------------------------------------------------------------------------
# corrector
# ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    x: ExtComplex
    iterations: np.ndarray
    converged: np.ndarray
    singular: np.ndarray
    residual: np.ndarray
    trace: np.ndarray  # (rounds, B) columns that did work in each round

    @property
    def rounds(self) -> int:
        return self.trace.shape[0]


def _norm_inf(z: ExtComplex) -> np.ndarray:
    if z.shape[0] == 0:
        return np.zeros(z.shape[1:])
    return np.max(z.abs_hi(), axis=0)


def newton_correct(plan, gamma: ExtComplex, x: ExtComplex, t, cfg: TrackConfig,
                   max_iter: int | None = None, ws: BatchWorkspace | None = None) -> NewtonResult:
    """Batched Newton on ``H(., t) = 0`` for every column of ``x``.

    One iteration evaluates ``H`` and its Jacobian, solves
    ``J dx = -H`` in the least-squares sense and updates ``x``.  A column has
    converged once ``||H||_inf <= residual_tol`` and
    ``||dx||_inf <= update_tol * max(1, ||x||_inf)``; from then on it idles.
    A singular Jacobian stops that column without convergence.
    """
    max_iter = cfg.max_newton if max_iter is None else max_iter
    b = x.shape[1]
    t = np.broadcast_to(np.asarray(t, dtype=float), (b,))
    x = x.copy()
    iterations = np.zeros(b, dtype=np.int64)
    converged = np.zeros(b, dtype=bool)
    singular = np.zeros(b, dtype=bool)
    residual = np.full(b, np.inf)
    working = np.ones(b, dtype=bool)
    trace = []
    for _ in range(max_iter):
        idx = np.flatnonzero(working)
        if idx.size == 0:
            break
        trace.append(working.copy())
        full = idx.size == b
        xs = x if full else x[:, idx]
        values, jac = eval_system_batch(plan, gamma, xs, t if full else t[idx], ws)
        dx, sing = least_squares_batch(jac, -values)
        res = _norm_inf(values)
        bad = sing | ~np.isfinite(res)
        dxn = _norm_inf(dx)
        ok = ~bad & np.isfinite(dxn)
        xn = _norm_inf(xs)
        conv = ok & (res <= cfg.residual_tol) & (dxn <= cfg.update_tol * np.maximum(1.0, xn))
        xs = where(ok, xs + dx, xs)
        if full:
            x = xs
        else:
            x[:, idx] = xs
        iterations[idx] += 1
        residual[idx] = res
        converged[idx] = conv
        singular[idx] = ~ok
        working[idx] = ~(conv | ~ok)
    trace = np.array(trace, dtype=bool).reshape(len(trace), b)
    return NewtonResult(x, iterations, converged, singular, residual, trace)


# ---------------------------------------------------------------------------
# step control, status check and compaction
# ---------------------------------------------------------------------------

def step_control(p: PathState, converged: bool, x_new: ExtComplex | None, t_next: float,
                 cfg: TrackConfig) -> PathState:
    """Accept or reject one step of a single path (in place, returned for chaining)."""
    if p.status != Status.ACTIVE:
        raise ValueError("step control on a finished path")
    if converged:
        p.t = t_next
        p.x = x_new.copy()
        p.hist_t.insert(0, t_next)
        p.hist_x.insert(0, x_new.copy())
        del p.hist_t[HISTORY:], p.hist_x[HISTORY:]
        p.steps += 1
        p.successes += 1
        if p.successes >= cfg.expand_after:
            p.h = min(p.h * cfg.expand, cfg.h_max)
            p.successes = 0
    else:
        p.x = p.hist_x[0].copy()
        p.rejections += 1
        p.successes = 0
        p.h *= cfg.contract
        if p.h < cfg.h_min:
            p.status = Status.FAILED
            p.annotation = "step size underflow"
    return p


def next_t(t, h):
    """Step target; a step reaching or passing 1 lands exactly on 1."""
    t = np.asarray(t, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.where(t + h >= 1.0, 1.0, t + h)


def growth_exponent(hist_t: np.ndarray, hist_x: ExtComplex, count: np.ndarray) -> np.ndarray:
    """Slope of ``log ||x||`` against ``-log(1 - t)`` between the newest and oldest samples.

    Paths heading to infinity like ``(1 - t)^(-w)`` give ``w > 0``; paths with
    a finite endpoint give a slope tending to zero.  NaN with fewer than two
    samples.
    """
    count = np.asarray(count)
    b = hist_t.shape[1]
    cols = np.arange(b)
    oldest = np.maximum(count - 1, 0)
    norms = np.max(hist_x.abs_hi(), axis=1)  # (K, B)
    y0, y1 = norms[0], norms[oldest, cols]
    s0, s1 = 1.0 - hist_t[0], 1.0 - hist_t[oldest, cols]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (np.log(y0) - np.log(y1)) / (np.log(s1) - np.log(s0))
    return np.where((count >= 2) & (s0 > 0) & (s1 > s0), w, np.nan)


def check_status(t, converged, h, xnorm, steps, cfg: TrackConfig, growth=None):
    """Status vector and failure annotations for the columns of one round.

    A path that stalls (step size underflow or step limit) while its norm
    grows like ``(1 - t)^(-w)`` with ``w >= divergence_exponent`` is
    annotated as diverged as well.
    """
    t = np.asarray(t, dtype=float)
    converged = np.asarray(converged, dtype=bool)
    status = np.zeros(t.shape, dtype=np.int64)
    notes = np.full(t.shape, "", dtype=object)
    success = (t == 1.0) & converged
    diverged = ~success & (np.asarray(xnorm) > cfg.divergence_bound)
    tiny = ~success & ~diverged & (np.asarray(h) < cfg.h_min)
    exhausted = ~success & ~diverged & ~tiny & (np.asarray(steps) > cfg.max_steps)
    status[success] = Status.SUCCESS
    status[diverged | tiny | exhausted] = Status.FAILED
    notes[tiny] = "step size underflow"
    notes[exhausted] = "step limit"
    if growth is not None:
        stalled = (tiny | exhausted) & (np.nan_to_num(np.asarray(growth), nan=0.0) >= cfg.divergence_exponent)
        diverged = diverged | stalled
    notes[diverged] = "diverged"
    return status, notes


def compact(status):
    """Prefix-scan compaction of a status vector.

    Returns ``(active_count, scan, job_idx, path_idx, order)``: ``scan`` is the
    inclusive scan of ``status == 0``, ``job_idx`` the 1-based job numbers of
    the active slots, ``path_idx`` their slots, and ``order`` the permutation
    putting active slots first (stable) and finished ones at the tail.
    """
    status = np.asarray(status)
    flags = (status == Status.ACTIVE).astype(np.int64)
    scan = np.cumsum(flags)
    path_idx = np.flatnonzero(flags)
    job_idx = scan[path_idx]
    active_count = int(scan[-1]) if scan.size else 0
    order = np.concatenate([path_idx, np.flatnonzero(flags == 0)])
    return active_count, scan, job_idx, path_idx, order


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class PathResult:
    path_id: int
    start_index: int
    x: ExtComplex
    residual: float
    status: Status
    annotation: str
    steps: int
    newton_iterations: int
    rejections: int
    wall_time: float


@dataclass
class SolutionSet:
    """Endpoints ``(n, m)`` and per-path data in path-id order."""

    endpoints: ExtComplex
    start_index: np.ndarray
    residual: np.ndarray
    status: np.ndarray
    annotation: np.ndarray
    steps: np.ndarray
    newton_iterations: np.ndarray
    rejections: np.ndarray
    wall_time: np.ndarray
    batch_rounds: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.status)

    def __iter__(self) -> Iterator[PathResult]:
        for i in range(len(self)):
            yield PathResult(
                i, int(self.start_index[i]), self.endpoints[:, i], float(self.residual[i]),
                Status(int(self.status[i])), str(self.annotation[i]), int(self.steps[i]),
                int(self.newton_iterations[i]), int(self.rejections[i]), float(self.wall_time[i]),
            )

    @property
    def success(self) -> np.ndarray:
        return self.status == Status.SUCCESS

    def counts(self) -> dict:
        return {s.name.lower(): int(np.sum(self.status == s)) for s in (Status.SUCCESS, Status.FAILED, Status.ACTIVE)}

    @classmethod
    def concatenate(cls, parts: list["SolutionSet"]) -> "SolutionSet":
        def cat(name):
            return np.concatenate([getattr(p, name) for p in parts])

        endpoints = concatenate([p.endpoints for p in parts], axis=1)
        rounds = [r for p in parts for r in p.batch_rounds]
        return cls(endpoints, cat("start_index"), cat("residual"), cat("status"), cat("annotation"),
                   cat("steps"), cat("newton_iterations"), cat("rejections"), cat("wall_time"), rounds)


# ---------------------------------------------------------------------------
# the lockstep loop
# ---------------------------------------------------------------------------

def _emit(stream, batch: PathBatch, k: int, ids: np.ndarray) -> None:
    for s in range(k):
        stream.write(json.dumps({
            "path": int(ids[batch.path_id[s]]), "t": float(batch.t[s]), "h": float(batch.h[s]),
            "newton": int(batch.newton[s]), "status": int(batch.status[s]),
        }) + "\n")


def _refine(h: HomotopyInstance, x: ExtComplex, cfg: TrackConfig, ws) -> tuple[ExtComplex, np.ndarray]:
    """Up to ``refine_iterations`` Newton steps at t=1, then the final ``||f||_inf``."""
    plan = h.plan
    if cfg.refine_iterations:
        x = newton_correct(plan, h.gamma, x, 1.0, cfg, cfg.refine_iterations, ws).x
    values, _ = eval_system_batch(plan, h.gamma, x, 1.0, ws)
    return x, _norm_inf(values)


def track_batch(h: HomotopyInstance, x0: ExtComplex, path_ids, cfg: TrackConfig,
                stream: IO[str] | None = None) -> SolutionSet:
    """Track the columns of ``x0`` in lockstep until none is active."""
    plan = h.plan
    gamma = h.gamma
    wall0 = time.perf_counter()
    ids = np.asarray(path_ids, dtype=np.int64)
    batch = PathBatch(x0, np.arange(x0.shape[1]), cfg, plan)
    ws = batch.workspace
    wall = np.zeros(batch.width)
    while batch.active_count:
        k = batch.active_count
        a = slice(0, k)
        t_next = next_t(batch.t[a], batch.h[a])
        xp = lagrange_predict(batch.hist_t[:, a], batch.hist_x[:, :, a], batch.count[a], t_next)
        res = newton_correct(plan, gamma, xp, t_next, cfg, ws=ws)
        batch.rounds += res.rounds
        batch.newton[a] += res.iterations
        ok = res.converged

        # reaching t = 1: refine before declaring success
        landing = np.flatnonzero(ok & (t_next == 1.0))
        if landing.size:
            xr, resid = _refine(h, res.x[:, landing], cfg, ws)
            res.x[:, landing] = xr
            batch.residual[landing] = resid
            ok[landing] &= resid <= 10.0 * cfg.residual_tol

        # accepted steps
        acc = np.flatnonzero(ok)
        if acc.size:
            batch.t[acc] = t_next[acc]
            batch.x[:, acc] = res.x[:, acc]
            batch.hist_t[1:, acc] = batch.hist_t[:-1, acc]
            batch.hist_t[0, acc] = t_next[acc]
            batch.hist_x[1:, :, acc] = batch.hist_x[:-1, :, acc]
            newest = batch.hist_x[0]
            newest[:, acc] = res.x[:, acc]
            batch.count[acc] = np.minimum(batch.count[acc] + 1, HISTORY)
            batch.steps[acc] += 1
            batch.successes[acc] += 1
            grow = acc[batch.successes[acc] >= cfg.expand_after]
            batch.h[grow] = np.minimum(batch.h[grow] * cfg.expand, cfg.h_max)
            batch.successes[grow] = 0

        # rejected steps keep the last accepted sample
        rej = np.flatnonzero(~ok)
        if rej.size:
            batch.x[:, rej] = batch.hist_x[0][:, rej]
            batch.rejections[rej] += 1
            batch.successes[rej] = 0
            batch.h[rej] *= cfg.contract

        xnorm = _norm_inf(batch.x[:, a])
        growth = growth_exponent(batch.hist_t[:, a], batch.hist_x[:, :, a], batch.count[a])
        status, notes = check_status(
            np.where(ok, t_next, batch.t[a]), ok, batch.h[a], xnorm,
            batch.steps[a] + batch.rejections[a], cfg, growth,
        )
        batch.status[a] = status
        batch.annotation[a] = notes
        done = np.flatnonzero(status != Status.ACTIVE)
        wall[batch.path_id[done]] = time.perf_counter() - wall0
        if stream is not None:
            _emit(stream, batch, k, ids)
        count, _, _, _, order = compact(status)
        if count < k:
            batch.permute(order)
        batch.active_count = count

    # undo the compaction permutation
    inv = np.argsort(batch.path_id)
    batch.permute(inv)
    failed = batch.status == Status.FAILED
    if np.any(failed):
        # residual of failed endpoints, for the record only
        idx = np.flatnonzero(failed)
        values, _ = eval_system_batch(plan, gamma, batch.x[:, idx], 1.0, ws)
        batch.residual[idx] = _norm_inf(values)
    return SolutionSet(
        batch.x, ids, batch.residual, batch.status, batch.annotation, batch.steps,
        batch.newton, batch.rejections, wall, [batch.rounds],
    )


def _track_chunk(args):
    h, starts, indices, cfg = args
    return track_batch(h, starts.take(indices), indices, cfg)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("HOMOTRACK_WORKERS", "1")))
    except ValueError:
        return 1


def track_all(h: HomotopyInstance, starts: StartData, cfg: TrackConfig | None = None,
              indices=None, stream: IO[str] | None = None) -> SolutionSet:
    """Track every start (or the given start indices) in batches of ``cfg.batch_size``.

    Batches are independent and may run on a process pool of ``cfg.workers``;
    the result is in start-index order and does not depend on either knob.
    """
    cfg = cfg or TrackConfig(prec=h.prec)
    if cfg.prec is not h.prec:
        cfg = replace(cfg, prec=h.prec, residual_tol=None, update_tol=None, h_min=None)
    if starts.prec is not h.prec:
        raise ValueError("start data and homotopy use different precision levels")
    idx = np.arange(len(starts)) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("no start solutions to track")
    chunks = [idx[i : i + cfg.batch_size] for i in range(0, idx.size, cfg.batch_size)]
    if cfg.workers > 1 and len(chunks) > 1 and stream is None:
        h.plan  # build once before pickling
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_track_chunk, [(h, starts, c, cfg) for c in chunks]))
    else:
        parts = [track_batch(h, starts.take(c), c, cfg, stream) for c in chunks]
    out = SolutionSet.concatenate(parts)
    log.info("tracked %d paths: %s", len(out), out.counts())
    return out
