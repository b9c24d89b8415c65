"""Estimator-style front end: ``fit`` builds the homotopy, ``transform`` tracks paths."""

from __future__ import annotations

from typing import IO

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    check_gamma,
    check_is_fitted,
    check_positive,
    check_precision,
    check_starts,
    check_system,
)
from .homotopy import ListStarts, make_homotopy, random_gamma, total_degree_start
from .tracker import SolutionSet, TrackConfig, default_workers, track_all

__all__ = ["HomotopySolver"]


class HomotopySolver(BaseEstimator):
    """Solve a square polynomial system by batched path tracking.

    Parameters
    ----------
    precision : {"d", "dd", "qd"}
        Working precision for every stage.
    gamma : complex, (re, im) pair, "re,im" text, or None
        Constant of the gamma trick; scaled to unit modulus.  ``None``
        draws it from ``seed``.
    seed : int or None
        Seed for the random gamma; ``None`` uses fresh OS entropy.
    residual_tol, update_tol, h_min : float or None
        ``None`` picks the per-precision default.
    batch_size : int
        Number of paths tracked in lockstep.
    workers : int or None
        Processes for independent batches; ``None`` reads ``HOMOTRACK_WORKERS``.

    Attributes
    ----------
    homotopy_ : HomotopyInstance
    start_system_ : PolySystem
    starts_ : StartData or None
        Total-degree start solutions when ``fit`` built the start system.
    gamma_ : ExtComplex
    config_ : TrackConfig
    solutions_ : SolutionSet
        Result of the latest ``transform``.
    """

    def __init__(
        self,
        precision="d",
        gamma=None,
        seed=None,
        residual_tol=None,
        update_tol=None,
        max_newton=3,
        h_init=0.05,
        h_min=None,
        h_max=0.1,
        batch_size=64,
        workers=1,
        max_steps=10_000,
    ):
        self.precision = precision
        self.gamma = gamma
        self.seed = seed
        self.residual_tol = residual_tol
        self.update_tol = update_tol
        self.max_newton = max_newton
        self.h_init = h_init
        self.h_min = h_min
        self.h_max = h_max
        self.batch_size = batch_size
        self.workers = workers
        self.max_steps = max_steps

    def _config(self, prec) -> TrackConfig:
        workers = default_workers() if self.workers is None else self.workers
        return TrackConfig(
            prec=prec,
            residual_tol=check_positive("residual_tol", self.residual_tol, allow_none=True),
            update_tol=check_positive("update_tol", self.update_tol, allow_none=True),
            max_newton=check_positive("max_newton", self.max_newton, integer=True),
            h_init=check_positive("h_init", self.h_init),
            h_min=check_positive("h_min", self.h_min, allow_none=True),
            h_max=check_positive("h_max", self.h_max),
            batch_size=check_positive("batch_size", self.batch_size, integer=True),
            workers=check_positive("workers", workers, integer=True),
            max_steps=check_positive("max_steps", self.max_steps, integer=True),
        )

    def fit(self, target, y=None, start_system=None):
        """Build the homotopy from ``target`` (a PolySystem or its text).

        Without ``start_system`` the total-degree start system and its
        solutions are generated; with one, ``transform`` needs explicit starts.
        """
        prec = check_precision(self.precision)
        config = self._config(prec)
        f = check_system(target)
        if start_system is None:
            g, starts = total_degree_start(f, prec)
        else:
            g, starts = check_system(start_system), None
        if self.gamma is not None:
            gamma = check_gamma(self.gamma, prec)
        else:
            seed = self.seed if self.seed is not None else int(np.random.SeedSequence().entropy % 2**63)
            gamma = random_gamma(seed, prec)
        self.homotopy_ = make_homotopy(f, g, gamma)
        self.target_ = f
        self.start_system_ = g
        self.starts_ = starts
        self.gamma_ = gamma
        self.config_ = config
        self.n_features_in_ = f.dimension
        return self

    def transform(self, starts=None, stream: IO[str] | None = None) -> SolutionSet:
        """Track paths to ``t = 1`` and return their endpoints.

        ``starts`` may be start indices into ``starts_``, StartData, an
        ExtComplex of shape ``(n, m)``, or a complex array of that shape.
        ``None`` tracks every start generated by ``fit``.
        """
        check_is_fitted(self, "homotopy_")
        h = self.homotopy_
        if starts is None:
            if self.starts_ is None:
                raise ValueError("fit was given a start system; pass start solutions to transform")
            data, indices = self.starts_, None
        else:
            data, indices = check_starts(starts, h.dimension, h.prec)
            if data is None:
                if self.starts_ is None:
                    raise ValueError("start indices need the start solutions generated by fit")
                data = self.starts_
            elif not hasattr(data, "take"):
                data = ListStarts(data)
        self.solutions_ = track_all(h, data, self.config_, indices=indices, stream=stream)
        return self.solutions_

    def fit_transform(self, target, y=None, **fit_params) -> SolutionSet:
        return self.fit(target, y, **fit_params).transform()
