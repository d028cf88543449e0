"""Monotone (isotonic) estimator of N via the least concave majorant.

The plug-in estimator N~_n is not monotone and has poles.  Its integral

    U_n(t) = int_0^t N~_n(u) du

is finite and continuous, and each term has a closed-form antiderivative.
Between two consecutive poles every term of N~_n is increasing in t, so
U_n is convex there and its least concave majorant can only touch U_n at
t = 0 and at the poles.  The hull of those points is therefore the exact
majorant on [0, inf); extra refinement points never change it and are
only kept as an option for cross-checks.  The right derivative of the
majorant is the isotonic estimate N^_n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .geometry import ObservationSet, QuantityKind, q_transform
from .plugin import n_tilde

__all__ = [
    "IntegratedCurve",
    "MonotoneCurve",
    "IsotonicFit",
    "u_n",
    "integrated_curve",
    "least_concave_majorant",
    "pava_decreasing",
    "fit_isotonic",
    "n_hat",
    "isotonic_cdf",
]


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ValueError("t must be finite and >= 0")
    return t


def _pole_factor(kind: QuantityKind, z: float, h: float, p: float, y: float) -> float:
    """``sqrt((p - y) / (z - q(h; y)))`` with the gap factored to avoid cancellation."""
    if kind is QuantityKind.SQUARED_RADIUS:
        return 1.0
    if kind is QuantityKind.VOLUME:
        return math.sqrt(math.pi * h)
    if kind is QuantityKind.ASPECT_RATIO:
        # z - (h y)^2 = h (p - y) (sqrt z + h y)
        return 1.0 / math.sqrt(h * (math.sqrt(z) + h * y))
    # sqrt z - r(y) = (p - y) / (2 pi (R(p) + R(y))), R = sqrt(h^2/4 + t/2pi)
    half = 0.5 * h
    rp = math.sqrt(half * half + p / (2.0 * math.pi))
    ry = math.sqrt(half * half + y / (2.0 * math.pi))
    r = math.sqrt(q_transform(kind, h, y))
    return math.sqrt(2.0 * math.pi * (rp + ry) / (math.sqrt(z) + r))


def _u_n_quadrature(z, h, kind: QuantityKind, t: float) -> float:
    """Term-wise adaptive quadrature of the plug-in estimator over [0, t].

    Each term is written as ``(p - y)^{-1/2}`` times a smooth factor; when
    the interval reaches the pole the singular part is handled by an
    algebraic quadrature weight.
    """
    total = []
    poles = kernels.poles(z, h, kind.code)
    for zi, hi, pi in zip(z, h, poles):
        upper = min(t, pi)
        if upper <= 0:
            continue

        def smooth(y, zi=zi, hi=hi, pi=pi):
            return _pole_factor(kind, zi, hi, pi, min(y, pi))

        if upper < pi:
            val, _ = integrate.quad(
                lambda y: smooth(y) / math.sqrt(pi - y), 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=200
            )
        else:
            val, _ = integrate.quad(smooth, 0.0, upper, weight="alg", wvar=(0.0, -0.5), epsabs=0.0, epsrel=1e-12, limit=200)
        total.append(val)
    return math.fsum(total) / z.size


def u_n(obs: ObservationSet, kind: QuantityKind, t, method: str = "closed"):
    """Integrated plug-in estimator ``U_n(t)``.

    Parameters
    ----------
    obs : ObservationSet
    kind : QuantityKind
    t : float or array_like
        Upper integration limits, ``t >= 0``.
    method : {"closed", "quadrature"}
        ``"closed"`` sums the exact per-term antiderivatives (the default);
        ``"quadrature"`` integrates each term numerically and is much slower.
    """
    kind = QuantityKind.parse(kind)
    t_arr = _check_t(t)
    flat = np.ascontiguousarray(t_arr.reshape(-1))
    if method == "closed":
        out = kernels.un_grid(obs.z, obs.h, kind.code, flat)
    elif method == "quadrature":
        out = np.array([_u_n_quadrature(obs.z, obs.h, kind, float(v)) for v in flat])
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.asarray(out).reshape(t_arr.shape)
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class IntegratedCurve:
    """``U_n`` evaluated exactly at sorted breakpoints.

    The breakpoints always contain 0 and every distinct pole; the
    observations are kept so the curve can be evaluated anywhere.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    kind: QuantityKind | None = None
    obs: ObservationSet | None = None

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        u = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != u.shape or t.size < 1:
            raise ValueError("breakpoints and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", u)

    def __call__(self, t):
        if self.obs is None:
            return np.interp(t, self.breakpoints, self.values)
        return u_n(self.obs, self.kind, t)


def _refined(knots: np.ndarray, refine: int) -> np.ndarray:
    if refine <= 0 or knots.size < 2:
        return knots
    a, b = knots[:-1, None], knots[1:, None]
    # geometric approach towards the right-hand pole, where U_n bends most
    frac = 1.0 - 0.5 ** np.arange(1, refine + 1)
    extra = (a + (b - a) * frac).reshape(-1)
    return np.unique(np.concatenate([knots, extra]))


def integrated_curve(obs: ObservationSet, kind: QuantityKind, refine: int = 0) -> IntegratedCurve:
    """Evaluate ``U_n`` at 0, at every pole and at optional refinement points.

    ``refine`` extra points per inter-pole interval approach the right-hand
    pole geometrically.  They lie on convex stretches of ``U_n`` and do not
    alter the majorant.
    """
    kind = QuantityKind.parse(kind)
    poles = kernels.poles(obs.z, obs.h, kind.code)
    knots = np.unique(np.concatenate([[0.0], poles]))
    knots = _refined(knots, int(refine))
    values = kernels.un_grid(obs.z, obs.h, kind.code, np.ascontiguousarray(knots))
    return IntegratedCurve(knots, np.asarray(values), kind, obs)


@dataclass(frozen=True, eq=False)
class MonotoneCurve:
    """Right-continuous step function on sorted knots.

    ``values[k]`` holds on ``[knots[k], knots[k+1])``; the last value holds
    for all ``t >= knots[-1]`` and the first one below ``knots[0]``.  When
    the curve is the derivative of a concave majorant, ``heights`` holds the
    majorant at the knots.
    """

    knots: np.ndarray
    values: np.ndarray
    heights: np.ndarray | None = None

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.shape != values.shape or knots.ndim != 1:
            raise ValueError("knots and values must be 1-d arrays of equal length")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if self.heights is not None:
            object.__setattr__(self, "heights", np.asarray(self.heights, dtype=float))

    @property
    def slopes(self) -> np.ndarray:
        return self.values

    def _segment(self, t):
        k = np.searchsorted(self.knots, t, side="right") - 1
        return np.clip(k, 0, self.knots.size - 1)

    def __call__(self, t):
        out = self.values[self._segment(np.asarray(t, dtype=float))]
        return out.item() if np.ndim(out) == 0 else out

    def majorant(self, t):
        """Value of the concave majorant whose right derivative this is."""
        if self.heights is None:
            raise ValueError("curve carries no majorant heights")
        t = np.asarray(t, dtype=float)
        k = self._segment(t)
        out = self.heights[k] + self.values[k] * (t - self.knots[k])
        return out.item() if np.ndim(out) == 0 else out


def least_concave_majorant(curve: IntegratedCurve, tail_slope: float = 0.0) -> MonotoneCurve:
    """Least concave majorant of the points of ``curve``, as its right derivative.

    Parameters
    ----------
    curve : IntegratedCurve
    tail_slope : float
        Slope used to the right of the last breakpoint.  ``U_n`` is constant
        past its largest pole, hence the default 0.
    """
    t, u = curve.breakpoints, curve.values
    idx = np.asarray(kernels.upper_hull(np.ascontiguousarray(t), np.ascontiguousarray(u)))
    kt, ku = t[idx], u[idx]
    slopes = np.empty(kt.size)
    slopes[:-1] = np.diff(ku) / np.diff(kt)
    slopes[-1] = tail_slope
    return MonotoneCurve(kt, slopes, ku)


def pava_decreasing(y, w=None) -> np.ndarray:
    """Weighted antitonic regression by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    sums, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        sums.append(yi * wi)
        weights.append(wi)
        sizes.append(1)
        while len(sums) > 1 and sums[-2] / weights[-2] <= sums[-1] / weights[-1]:
            s, ww, c = sums.pop(), weights.pop(), sizes.pop()
            sums[-1] += s
            weights[-1] += ww
            sizes[-1] += c
    return np.repeat([s / ww for s, ww in zip(sums, weights)], sizes)


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    """Isotonic estimate ``N^_n`` together with the curve it came from.

    ``n_tilde_zero`` is the plug-in value ``N~_n(0)``.  The majorant's first
    slope is never below it, so ``N^_n(0)`` is biased upwards in finite
    samples; ``cdf(t, zero="plugin")`` normalizes by ``N~_n(0)`` instead.
    """

    curve: IntegratedCurve
    n_hat: MonotoneCurve
    n_tilde_zero: float = math.nan

    @property
    def n_zero(self) -> float:
        return float(self.n_hat.values[0])

    def normalizer(self, zero: str = "isotonic") -> float:
        """``N^_n(0)`` for ``zero="isotonic"``, ``N~_n(0)`` for ``zero="plugin"``."""
        if zero == "isotonic":
            return self.n_zero
        if zero == "plugin":
            if not math.isfinite(self.n_tilde_zero):
                raise ValueError("fit carries no plug-in value at 0")
            return self.n_tilde_zero
        raise ValueError("zero must be 'isotonic' or 'plugin'")

    def cdf(self, t, zero: str = "isotonic"):
        """``1 - N^_n(t) / N(0)``: nondecreasing, in [0, 1].

        ``N(0)`` is ``N^_n(0)`` by default, ``N~_n(0)`` with ``zero="plugin"``.
        """
        out = 1.0 - np.asarray(self.n_hat(t)) / self.normalizer(zero)
        out = np.clip(out, 0.0, 1.0)
        return out.item() if np.ndim(out) == 0 else out

    def cdf_curve(self) -> MonotoneCurve:
        return MonotoneCurve(self.n_hat.knots, np.clip(1.0 - self.n_hat.values / self.n_zero, 0.0, 1.0))


def fit_isotonic(obs: ObservationSet, kind: QuantityKind, refine: int = 0) -> IsotonicFit:
    """Fit the isotonic estimator for quantity ``kind``."""
    curve = integrated_curve(obs, kind, refine=refine)
    nh = least_concave_majorant(curve)
    if nh.values[0] <= 0:
        warnings.warn("isotonic estimate of N(0) is not positive", RuntimeWarning, stacklevel=2)
    return IsotonicFit(curve, nh, float(n_tilde(obs, kind, 0.0)))


def n_hat(obs: ObservationSet, kind: QuantityKind, t, refine: int = 0):
    """Isotonic estimate ``N^_n(t)``."""
    t = _check_t(t)
    return fit_isotonic(obs, kind, refine=refine).n_hat(t)


def isotonic_cdf(obs: ObservationSet, kind: QuantityKind, grid, refine: int = 0) -> np.ndarray:
    """Isotonic CDF estimate of ``kind`` evaluated on ``grid``."""
    grid = _check_t(grid)
    return np.asarray(fit_isotonic(obs, kind, refine=refine).cdf(grid))
