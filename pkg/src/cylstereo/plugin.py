"""Plug-in (empirical) estimators.

All estimators here are weighted empirical means over the observed
rectangles.  The weights ``Z_i^{-1/2}`` undo the size bias of the cut: a
cylinder is hit with probability proportional to its radius.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import ObservationSet, QuantityKind

__all__ = [
    "PoleError",
    "Moment",
    "ObservableMeans",
    "MomentSet",
    "PluginCdfPoint",
    "PluginCdf",
    "observable_means",
    "n_tilde",
    "plugin_cdf",
    "avoid_poles",
    "pole_midpoints",
    "height_cdf_weighted",
    "height_cdf_unweighted",
    "moments",
    "covariance_hat",
]

HALF_PI = 0.5 * math.pi


class PoleError(ArithmeticError):
    """Grid point coincides with a pole ``t = p(H_i; Z_i)`` of the plug-in estimator."""

    def __init__(self, t_values):
        self.t = np.atleast_1d(np.asarray(t_values, dtype=float))
        super().__init__(f"plug-in estimator has a pole at t = {self.t.tolist()}")


class Moment(enum.Enum):
    """Expectations with an empirical estimator and an asymptotic variance."""

    RADIUS = "radius"
    SQUARED_RADIUS = "squared_radius"
    HEIGHT = "height"
    VOLUME = "volume"
    SURFACE_AREA = "surface_area"


def _mean(values) -> float:
    values = np.asarray(values, dtype=float)
    return math.fsum(values) / values.size


@dataclass(frozen=True)
class ObservableMeans:
    """Empirical means of the observable powers used throughout.

    ``z_m`` is mean(Z^-1/2), ``z_p`` mean(Z^1/2), ``hz_m`` mean(H Z^-1/2),
    ``hz_p`` mean(H Z^1/2) and ``h`` mean(H).
    """

    n: int
    z_m: float
    z_p: float
    hz_m: float
    hz_p: float
    h: float


def observable_means(obs: ObservationSet) -> ObservableMeans:
    rz = np.sqrt(obs.z)
    inv = 1.0 / rz
    return ObservableMeans(
        n=obs.n,
        z_m=_mean(inv),
        z_p=_mean(rz),
        hz_m=_mean(obs.h * inv),
        hz_p=_mean(obs.h * rz),
        h=_mean(obs.h),
    )


def n_tilde(obs: ObservationSet, kind: QuantityKind, t):
    """Plug-in estimate of ``N(t)``.

    ``(1/n) * sum (Z_i - q(H_i; t))^{-1/2}`` over the observations with
    ``Z_i > q(H_i; t)``.

    Raises
    ------
    PoleError
        If some ``t`` hits ``Z_i = q(H_i; t)`` exactly.
    """
    kind = QuantityKind.parse(kind)
    t_arr = np.asarray(t, dtype=float)
    flat = np.ascontiguousarray(t_arr.reshape(-1))
    if np.any(~np.isfinite(flat)) or np.any(flat < 0):
        raise ValueError("t must be finite and >= 0")
    values, hits = kernels.ntilde_grid(obs.z, obs.h, kind.code, flat)
    if np.any(hits):
        raise PoleError(flat[hits > 0])
    values = np.asarray(values).reshape(t_arr.shape)
    return values.item() if values.ndim == 0 else values


def avoid_poles(obs: ObservationSet, kind: QuantityKind, grid, rtol: float = 1e-12):
    """Move grid points that sit on (or within ``rtol`` of) a pole.

    A colliding point is moved to the midpoint between the pole and the
    next larger pole or grid point, which keeps the grid sorted.

    Returns
    -------
    grid : ndarray
    moved : ndarray of int
        Indices of the points that were moved.
    """
    kind = QuantityKind.parse(kind)
    grid = np.array(grid, dtype=float)
    p = np.unique(kernels.poles(obs.z, obs.h, kind.code))
    moved = []
    for i, t in enumerate(grid):
        k = np.searchsorted(p, t)
        near = [j for j in (k - 1, k) if 0 <= j < p.size and abs(p[j] - t) <= rtol * max(abs(t), 1e-300)]
        if not near:
            continue
        pole = p[near[-1]]
        above = [p[near[-1] + 1]] if near[-1] + 1 < p.size else []
        if i + 1 < grid.size:
            above.append(grid[i + 1])
        upper = min(above) if above else pole * 2.0 + 1.0
        grid[i] = 0.5 * (pole + upper)
        moved.append(i)
    return grid, np.asarray(moved, dtype=int)


def pole_midpoints(obs: ObservationSet, kind: QuantityKind, grid) -> np.ndarray:
    """Snap grid points to the midpoints of the inter-pole intervals containing them.

    Keeps the plug-in estimator as far from its poles as the data allow.
    Points past the last pole are kept; the result is sorted and unique.
    """
    kind = QuantityKind.parse(kind)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    knots = np.unique(np.concatenate([[0.0], kernels.poles(obs.z, obs.h, kind.code)]))
    k = np.searchsorted(knots, grid, side="right") - 1
    inside = k < knots.size - 1
    out = grid.copy()
    out[inside] = 0.5 * (knots[k[inside]] + knots[k[inside] + 1])
    return np.unique(out)


@dataclass(frozen=True)
class PluginCdfPoint:
    """Plug-in CDF value at one grid point; may be locally nonmonotone."""

    t: float
    f: float
    n_tilde: float


@dataclass(frozen=True, eq=False)
class PluginCdf:
    """Plug-in CDF ``1 - N~(t)/N~(0)`` on a grid, stored as arrays."""

    t: np.ndarray
    f: np.ndarray
    n_tilde: np.ndarray
    n_tilde_zero: float

    @property
    def points(self) -> list:
        return [PluginCdfPoint(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.f, self.n_tilde)]

    def __len__(self):
        return self.t.size


def plugin_cdf(obs: ObservationSet, kind: QuantityKind, grid) -> PluginCdf:
    """Plug-in estimate of the CDF of ``kind`` on an ascending grid."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    nt = np.asarray(n_tilde(obs, kind, grid), dtype=float).reshape(-1)
    n0 = float(n_tilde(obs, kind, 0.0))
    f = 1.0 - nt / n0
    return PluginCdf(grid, f, nt, n0)


def height_cdf_weighted(obs: ObservationSet, h):
    """Size-bias corrected estimate of the height CDF.

    ``sum Z_i^{-1/2} 1[H_i < h] / sum Z_i^{-1/2}``.  Valid whether or not
    radius and height are dependent.
    """
    h_arr = np.asarray(h, dtype=float)
    order = np.argsort(obs.h, kind="stable")
    hs = obs.h[order]
    w = 1.0 / np.sqrt(obs.z[order])
    csum = np.concatenate([[0.0], np.cumsum(w, dtype=np.longdouble)])
    k = np.searchsorted(hs, h_arr, side="left")
    out = np.asarray(csum[k] / csum[-1], dtype=float)
    return out.item() if out.ndim == 0 else out


def height_cdf_unweighted(obs: ObservationSet, h):
    """Plain ECDF of the observed heights.

    Only consistent when heights are independent of radii; otherwise the
    cut over-represents the heights of thick cylinders.
    """
    h_arr = np.asarray(h, dtype=float)
    hs = np.sort(obs.h)
    out = np.searchsorted(hs, h_arr, side="right") / hs.size
    out = np.asarray(out, dtype=float)
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class MomentSet:
    """Estimated expectations of the 3D quantities.

    Units follow the data: ``radius`` and ``height`` in length,
    ``squared_radius`` and ``surface_area`` in length^2, ``volume`` in
    length^3.  ``m_g_minus`` estimates ``E_g[Z^{-1/2}] = N(0)``.
    """

    radius: float
    squared_radius: float
    height: float
    volume: float
    surface_area: float
    m_g_minus: float

    def get(self, which: Moment) -> float:
        return getattr(self, Moment(which).value)


def moments(obs: ObservationSet) -> MomentSet:
    """Empirical estimates of E[sqrt X], E[X], E[H], E[V] and E[S]."""
    m = observable_means(obs)
    return MomentSet(
        radius=HALF_PI / m.z_m,
        squared_radius=2.0 * m.z_p / m.z_m,
        height=m.hz_m / m.z_m,
        volume=2.0 * math.pi * m.hz_p / m.z_m,
        surface_area=2.0 * math.pi * (2.0 * m.z_p / m.z_m + HALF_PI * m.h / m.z_m),
        m_g_minus=m.z_m,
    )


def covariance_hat(obs: ObservationSet) -> float:
    """Estimate of Cov(sqrt X, H) for the cylinders."""
    if obs.n < 2:
        raise ValueError("covariance estimate needs at least 2 observations")
    inv = 1.0 / np.sqrt(obs.z)
    s_inv = math.fsum(inv)
    s_h = math.fsum(obs.h)
    s_hinv = math.fsum(obs.h * inv)
    return HALF_PI * s_h / s_inv - HALF_PI / (s_inv / obs.n) * (s_hinv / s_inv)
