"""Asymptotic variances and pointwise confidence intervals.

The weights ``Z^{-1/2}`` have infinite variance, so every estimator here
converges at rate ``delta_n = sqrt(ln(n) / n)`` rather than ``n^{-1/2}``.
The limiting variances depend on the observable density near ``z = 0``
(through the boundary functionals ``xi_j = int h^j g(0, h) dh``) and, for
the CDFs, on the density of ``Z - q(H; t)`` at 0.  Both are estimated by
counting observations in a window of width ``b_n ~ n^{-1/3}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import ObservationSet, QuantityKind
from .isotonic import IsotonicFit, fit_isotonic
from .plugin import HALF_PI, Moment, height_cdf_weighted, n_tilde, observable_means

__all__ = [
    "LowCountWarning",
    "BandwidthConfig",
    "EstimateWithCI",
    "rate",
    "xi_hat",
    "tau_hat",
    "var_covariance",
    "covariance_variance_formula",
    "var_moment",
    "cdf_variance",
    "var_cdf_plugin",
    "var_cdf_isotonic",
    "height_window_integrals",
    "var_height_cdf",
    "ci",
]

Z_95 = 1.96


class LowCountWarning(RuntimeWarning):
    """A boundary window held no observations; the estimate is 0."""


@dataclass(frozen=True)
class BandwidthConfig:
    """Window width ``b_n = c_b * scale * n^{-1/3}``.

    With ``normalize="median"`` the scale is the sample median of ``Z`` so
    that ``c_b`` is unit free; ``normalize="none"`` uses ``c_b`` in the
    units of ``Z`` directly.
    """

    c_b: float = 1.0
    normalize: str = "median"

    def __post_init__(self):
        if not (self.c_b > 0 and math.isfinite(self.c_b)):
            raise ValueError("c_b must be a positive finite number")
        if self.normalize not in ("median", "none"):
            raise ValueError("normalize must be 'median' or 'none'")

    def bandwidth(self, obs: ObservationSet) -> float:
        scale = float(np.median(obs.z)) if self.normalize == "median" else 1.0
        return self.c_b * scale * obs.n ** (-1.0 / 3.0)


DEFAULT_BANDWIDTH = BandwidthConfig()


def rate(n: int) -> float:
    """``delta_n = sqrt(ln(n) / n)``."""
    return math.sqrt(math.log(n) / n)


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a 95% interval ``estimate +- 1.96 nu delta_n``."""

    estimate: float
    nu2: float
    n: int
    half_width: float

    @property
    def delta_n(self) -> float:
        return rate(self.n)

    @property
    def lower(self) -> float:
        return self.estimate - self.half_width

    @property
    def upper(self) -> float:
        return self.estimate + self.half_width

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "nu2": self.nu2,
            "half_width": self.half_width,
            "lower": self.lower,
            "upper": self.upper,
            "n": self.n,
        }


def ci(estimate: float, nu2: float, n: int) -> EstimateWithCI:
    """95% confidence interval at rate ``sqrt(ln n / n)``.

    A negative variance estimate is clamped to 0 with a warning.
    """
    if n < 2:
        raise ValueError("confidence interval needs n >= 2")
    nu2 = float(nu2)
    if nu2 < 0:
        warnings.warn(f"negative variance estimate {nu2:g} clamped to 0", RuntimeWarning, stacklevel=2)
        nu2 = 0.0
    return EstimateWithCI(float(estimate), nu2, int(n), Z_95 * math.sqrt(nu2) * rate(n))


def _bw(obs, bw) -> float:
    if bw is None:
        bw = DEFAULT_BANDWIDTH
    return bw.bandwidth(obs) if isinstance(bw, BandwidthConfig) else float(bw)


def _warn_empty(count, what):
    if np.any(np.asarray(count) == 0):
        warnings.warn(f"no observations in the {what} window", LowCountWarning, stacklevel=3)


def xi_hat(obs: ObservationSet, j: int, bw: "BandwidthConfig | float | None" = None) -> float:
    """Estimate of ``xi_j = int h^j g(0, h) dh`` from the window ``Z <= b_n``.

    ``xi_hat(obs, 0, bw)`` is also the estimate of ``g_Z(0)``.  A float
    ``bw`` is taken as the window width itself.
    """
    if j not in (0, 1, 2):
        raise ValueError("j must be 0, 1 or 2")
    b = _bw(obs, bw)
    inside = obs.z <= b
    _warn_empty(np.count_nonzero(inside), "boundary")
    return math.fsum(obs.h[inside] ** j) / (b * obs.n)


def tau_hat(obs: ObservationSet, kind: QuantityKind, t, bw: "BandwidthConfig | float | None" = None):
    """Estimate of the density of ``Z - q(H; t)`` at 0 (two-sided window)."""
    kind = QuantityKind.parse(kind)
    b = _bw(obs, bw)
    t_arr = np.asarray(t, dtype=float)
    flat = np.ascontiguousarray(t_arr.reshape(-1))
    counts = np.asarray(kernels.window_count_grid(obs.z, obs.h, kind.code, flat, b))
    _warn_empty(counts, "pole")
    out = (counts / (2.0 * b * obs.n)).reshape(t_arr.shape)
    return out.item() if out.ndim == 0 else out


def covariance_variance_formula(m_z, m_hz, m_h, xi0, xi1, xi2) -> float:
    """Asymptotic variance of the covariance estimator from its ingredients.

    ``m_z = E[Z^-1/2]``, ``m_hz = E[H Z^-1/2]``, ``m_h = E[H]`` under g.
    """
    ratio = m_hz / m_z
    braces = xi0 * (4.0 * ratio * ratio - 4.0 * ratio * m_h + m_h * m_h) + 2.0 * xi1 * (m_h - ratio) + xi2
    return HALF_PI**2 * m_z**-4 * braces


def var_covariance(obs: ObservationSet, bw: "BandwidthConfig | float | None" = None) -> float:
    """Estimated asymptotic variance of :func:`covariance_hat`."""
    if obs.n < 2:
        raise ValueError("needs n >= 2")
    m = observable_means(obs)
    xi = [xi_hat(obs, j, bw) for j in (0, 1, 2)]
    return covariance_variance_formula(m.z_m, m.hz_m, m.h, *xi)


def var_moment(obs: ObservationSet, which: Moment, bw: "BandwidthConfig | float | None" = None) -> float:
    """Estimated asymptotic variance of one of the moment estimators."""
    which = Moment(which)
    m = observable_means(obs)
    xi0 = xi_hat(obs, 0, bw)
    u4 = m.z_m**-4
    if which is Moment.RADIUS:
        return HALF_PI**2 * xi0 * u4
    if which is Moment.SQUARED_RADIUS:
        return 4.0 * xi0 * m.z_p**2 * u4
    if which is Moment.HEIGHT:
        xi1, xi2 = xi_hat(obs, 1, bw), xi_hat(obs, 2, bw)
        return (xi0 * m.hz_m**2 - 2.0 * xi1 * m.hz_m * m.z_m + xi2 * m.z_m**2) * u4
    if which is Moment.VOLUME:
        return 4.0 * math.pi**2 * xi0 * m.hz_p**2 * u4
    return xi0 * (4.0 * math.pi * m.z_p + math.pi**2 * m.h) ** 2 * u4


def cdf_variance(n0, nt, tau0, gz0, isotonic: bool = False):
    """``(N(0)^2 tau_q(0) + N(t)^2 g_Z(0)) / N(0)^4``, halved for the isotonic estimator."""
    n0 = np.asarray(n0, dtype=float)
    nt = np.asarray(nt, dtype=float)
    out = (n0**2 * tau0 + nt**2 * gz0) / n0**4
    if isotonic:
        out = out / 2.0
    return out.item() if np.ndim(out) == 0 else out


def var_cdf_plugin(obs: ObservationSet, kind: QuantityKind, t, bw: "BandwidthConfig | float | None" = None):
    """Estimated asymptotic variance of the plug-in CDF at ``t``."""
    n0 = n_tilde(obs, kind, 0.0)
    nt = n_tilde(obs, kind, t)
    return cdf_variance(n0, nt, tau_hat(obs, kind, t, bw), xi_hat(obs, 0, bw))


def var_cdf_isotonic(
    obs: ObservationSet,
    kind: QuantityKind,
    t,
    bw: "BandwidthConfig | float | None" = None,
    fit: IsotonicFit | None = None,
    zero: str = "isotonic",
):
    """Estimated asymptotic variance of the isotonic CDF at ``t``.

    Pass ``fit`` to reuse an existing :class:`IsotonicFit`.  The default
    halves the plug-in variance with ``N^_n`` in place of ``N~_n``.  With
    ``zero="plugin"`` the CDF is normalized by ``N~_n(0)``, which is not
    smoothed by the majorant, so only the ``N^_n(t)`` term is halved:
    ``tau_q(0) / (2 N(0)^2) + N(t)^2 g_Z(0) / N(0)^4``.
    """
    if fit is None:
        fit = fit_isotonic(obs, kind)
    n0 = fit.normalizer(zero)
    nt = np.asarray(fit.n_hat(t), dtype=float)
    tau0 = tau_hat(obs, kind, t, bw)
    gz0 = xi_hat(obs, 0, bw)
    if zero == "isotonic":
        return cdf_variance(n0, nt, tau0, gz0, isotonic=True)
    nt = np.minimum(nt, n0)
    out = tau0 / (2.0 * n0**2) + nt**2 * gz0 / n0**4
    return out.item() if np.ndim(out) == 0 else out


def height_window_integrals(obs: ObservationSet, h, bw: "BandwidthConfig | float | None" = None):
    """Window estimates of ``int_0^h g(0, y) dy`` and ``int_h^inf g(0, y) dy``.

    Returns ``(below, above)``; they count boundary-window observations with
    ``H < h`` and ``H >= h`` respectively, so ``below + above == xi_hat(0)``.
    """
    b = _bw(obs, bw)
    h_arr = np.asarray(h, dtype=float)
    hw = np.sort(obs.h[obs.z <= b])
    n_below = np.searchsorted(hw, h_arr, side="left")
    below = n_below / (b * obs.n)
    above = (hw.size - n_below) / (b * obs.n)
    if np.ndim(below) == 0:
        return float(below), float(above)
    return below, above


def var_height_cdf(obs: ObservationSet, h, bw: "BandwidthConfig | float | None" = None):
    """Estimated asymptotic variance of the weighted height CDF at ``h``."""
    f = np.asarray(height_cdf_weighted(obs, h))
    below, above = height_window_integrals(obs, h, bw)
    m_z = observable_means(obs).z_m
    out = (f * above + (1.0 - f) * below) / m_z**2
    return out.item() if np.ndim(out) == 0 else out
