"""Argument checks shared by the estimator facade and the CLI."""

from __future__ import annotations

from fractions import Fraction
from numbers import Real

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .homotopy import StartData
from .polysys import PolySystem, parse_system
from .xprec import ExtComplex, Precision, convert

__all__ = [
    "check_is_fitted",
    "check_precision",
    "check_positive",
    "check_system",
    "check_gamma",
    "check_starts",
    "parse_path_range",
]


def check_precision(value) -> Precision:
    try:
        return Precision.parse(value)
    except (ValueError, KeyError, TypeError):
        raise ValueError(f"precision must be one of d, dd, qd; got {value!r}") from None


def check_positive(name: str, value, allow_none: bool = False, integer: bool = False):
    if value is None:
        if allow_none:
            return None
        raise ValueError(f"{name} is required")
    if integer:
        if isinstance(value, bool) or int(value) != value:
            raise ValueError(f"{name} must be an integer, got {value!r}")
        value = int(value)
    elif not isinstance(value, Real):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_system(target) -> PolySystem:
    """Accept a PolySystem or its text form."""
    if isinstance(target, PolySystem):
        return target
    if isinstance(target, str):
        return parse_system(target)
    raise TypeError(f"expected a PolySystem or system text, got {type(target).__name__}")


def check_gamma(gamma, prec: Precision) -> ExtComplex:
    """Scalar gamma normalized to unit modulus in the working precision.

    Accepts an ExtComplex, a complex/real number, a ``(re, im)`` pair of
    numbers or decimal strings, or the text ``"re,im"``.
    """
    if isinstance(gamma, ExtComplex):
        z = convert(gamma, prec)
    else:
        if isinstance(gamma, str):
            parts = [p.strip() for p in gamma.split(",")]
            if len(parts) != 2:
                raise ValueError(f"gamma must be written as re,im; got {gamma!r}")
            gamma = tuple(parts)
        try:
            if isinstance(gamma, tuple):
                re, im = (Fraction(p) for p in gamma)
            else:
                c = complex(gamma)
                re, im = Fraction(c.real), Fraction(c.imag)
        except (TypeError, ValueError):
            raise ValueError(f"cannot read gamma from {gamma!r}") from None
        z = ExtComplex.from_parts(re, im, prec)
    if z.shape != ():
        raise ValueError("gamma must be a scalar")
    mod2 = z.abs2()
    if not float(mod2) > 0.0:
        raise ValueError("gamma must be nonzero")
    return z / mod2.sqrt()


def check_starts(starts, dimension: int, prec: Precision):
    """Normalize ``transform`` input to ``(StartData or ExtComplex, indices)``."""
    if isinstance(starts, StartData):
        if starts.dimension != dimension:
            raise ValueError(f"start data has dimension {starts.dimension}, system has {dimension}")
        return starts, None
    if isinstance(starts, ExtComplex):
        if len(starts.shape) != 2 or starts.shape[0] != dimension:
            raise ValueError(f"start points must have shape ({dimension}, m), got {starts.shape}")
        if starts.prec is not prec:
            raise ValueError("start points use a different precision level than the solver")
        return starts, None
    arr = np.asarray(starts)
    if arr.dtype.kind in "iu":
        return None, arr.astype(np.int64).ravel()
    if arr.dtype.kind in "fc":
        if arr.ndim != 2 or arr.shape[0] != dimension:
            raise ValueError(f"start points must have shape ({dimension}, m), got {arr.shape}")
        return ExtComplex.from_complex(arr, prec), None
    raise TypeError("starts must be StartData, an ExtComplex, a complex array, or start indices")


def parse_path_range(text: str, total: int) -> range:
    """``"a..b"`` as the half-open index range ``[a, b)``, clipped to ``total``."""
    try:
        a_text, b_text = text.split("..")
        a = int(a_text) if a_text.strip() else 0
        b = int(b_text) if b_text.strip() else total
    except ValueError:
        raise ValueError(f"path range must look like a..b, got {text!r}") from None
    if a < 0 or b < a:
        raise ValueError(f"path range {text!r} is empty or negative")
    if a >= total:
        raise ValueError(f"path range {text!r} starts past the last path ({total} paths)")
    return range(a, min(b, total))
