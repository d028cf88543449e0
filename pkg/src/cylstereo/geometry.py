"""Transforms between cylinder quantities and cut-plane observables.

A cylinder with squared radius ``x`` and height ``h`` is cut by a plane
parallel to its axis; the profile is a rectangle with squared half-width
``z`` and the same height.  For each quantity of interest ``T`` there is a
pair of functions

    q(h; t)  -- threshold on the squared radius: T > t  <=>  X > q(H; t)
    p(h; u)  -- the quantity itself for squared radius u and height h

which are mutual inverses in their second argument.  Lengths are in the
caller's units (typically micrometres); nothing here converts units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "QuantityKind",
    "Observation",
    "ObservationSet",
    "CylinderSample",
    "DomainError",
    "SingularityError",
    "EmptyObservationError",
    "q_transform",
    "p_transform",
    "q_dot",
    "p_dot",
    "validate",
]

TWO_PI = 2.0 * math.pi

# Below this value of t / (2 pi h^2 / 4) the literal surface-area threshold
# loses more than a couple of bits to cancellation.
_SURFACE_GUARD = 1.0


class DomainError(ValueError):
    """Input outside the domain of a transform (negative or non-finite)."""


class SingularityError(ArithmeticError):
    """Derivative requested at a point where it is infinite."""


class EmptyObservationError(ValueError):
    """No valid observation remained after validation."""


class QuantityKind(enum.Enum):
    """Cylinder quantity whose distribution is estimated."""

    SQUARED_RADIUS = 0
    ASPECT_RATIO = 1
    SURFACE_AREA = 2
    VOLUME = 3

    @property
    def code(self) -> int:
        return self.value

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def parse(cls, name: "str | QuantityKind") -> "QuantityKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for kind, aliases in _ALIASES.items():
            if key in aliases:
                return kind
        raise ValueError(f"unknown quantity kind {name!r}")


_SHORT = {
    QuantityKind.SQUARED_RADIUS: "sqradius",
    QuantityKind.ASPECT_RATIO: "ratio",
    QuantityKind.SURFACE_AREA: "surf",
    QuantityKind.VOLUME: "vol",
}

_ALIASES = {
    QuantityKind.SQUARED_RADIUS: {"sqradius", "squared_radius", "x"},
    QuantityKind.ASPECT_RATIO: {"ratio", "aspect_ratio", "r"},
    QuantityKind.SURFACE_AREA: {"surf", "surface_area", "s"},
    QuantityKind.VOLUME: {"vol", "volume", "v"},
}


def _as_checked(name: str, value, strict_positive: bool = False) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if strict_positive:
        if np.any(arr <= 0):
            raise DomainError(f"{name} must be > 0")
    elif np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr


def _ret(arr: np.ndarray):
    return arr.item() if arr.ndim == 0 else arr


def _surface_threshold(h: np.ndarray, t: np.ndarray) -> np.ndarray:
    s = t / TWO_PI
    half = 0.5 * h
    root = np.sqrt(half * half + s)
    with np.errstate(invalid="ignore", divide="ignore"):
        literal = (root - half) ** 2
        # same quantity, rationalised; used only where the literal form cancels
        guarded = (s / (root + half)) ** 2
    return np.where(4.0 * s < _SURFACE_GUARD * h * h, guarded, literal)


def q_transform(kind: QuantityKind, h, t):
    """Squared-radius threshold ``q(h; t)`` for quantity ``kind``.

    Parameters
    ----------
    kind : QuantityKind
    h : float or array_like
        Height, ``h > 0``.
    t : float or array_like
        Quantity value, ``t >= 0``.  Broadcast against ``h``.

    Returns
    -------
    float or ndarray
        ``q(h; t) >= 0``, nondecreasing in ``t``.
    """
    kind = QuantityKind.parse(kind)
    h = _as_checked("h", h, strict_positive=True)
    t = _as_checked("t", t)
    if kind is QuantityKind.SQUARED_RADIUS:
        out = np.broadcast_to(t, np.broadcast(h, t).shape).astype(float)
    elif kind is QuantityKind.ASPECT_RATIO:
        out = (h * t) ** 2
    elif kind is QuantityKind.SURFACE_AREA:
        out = _surface_threshold(*np.broadcast_arrays(h, t))
    else:
        out = t / (math.pi * h)
    return _ret(np.asarray(out, dtype=float))


def p_transform(kind: QuantityKind, h, u):
    """Quantity value ``p(h; u)`` of a cylinder with squared radius ``u``."""
    kind = QuantityKind.parse(kind)
    h = _as_checked("h", h, strict_positive=True)
    u = _as_checked("u", u)
    if kind is QuantityKind.SQUARED_RADIUS:
        out = np.broadcast_to(u, np.broadcast(h, u).shape).astype(float)
    elif kind is QuantityKind.ASPECT_RATIO:
        out = np.sqrt(u) / h
    elif kind is QuantityKind.SURFACE_AREA:
        out = TWO_PI * (u + h * np.sqrt(u))
    else:
        out = math.pi * h * u
    return _ret(np.asarray(out, dtype=float))


def q_dot(kind: QuantityKind, h, t):
    """Derivative of ``q(h; t)`` with respect to ``t``."""
    kind = QuantityKind.parse(kind)
    h = _as_checked("h", h, strict_positive=True)
    t = _as_checked("t", t)
    h, t = np.broadcast_arrays(h, t)
    if kind is QuantityKind.SQUARED_RADIUS:
        out = np.ones_like(t)
    elif kind is QuantityKind.ASPECT_RATIO:
        out = 2.0 * h * h * t
    elif kind is QuantityKind.SURFACE_AREA:
        s = t / TWO_PI
        root = np.sqrt(0.25 * h * h + s)
        # (1 - h / (2 root)) / (2 pi) without the cancellation at small t
        out = s / ((root + 0.5 * h) * root) / TWO_PI
    else:
        out = 1.0 / (math.pi * h)
    return _ret(np.asarray(out, dtype=float))


def p_dot(kind: QuantityKind, h, u):
    """Derivative of ``p(h; u)`` with respect to ``u``.

    Raises
    ------
    SingularityError
        At ``u = 0`` for the aspect ratio and surface area, where the
        derivative is infinite.
    """
    kind = QuantityKind.parse(kind)
    h = _as_checked("h", h, strict_positive=True)
    u = _as_checked("u", u)
    h, u = np.broadcast_arrays(h, u)
    if kind in (QuantityKind.ASPECT_RATIO, QuantityKind.SURFACE_AREA) and np.any(u == 0):
        raise SingularityError(f"p_dot for {kind.name} is infinite at u = 0")
    if kind is QuantityKind.SQUARED_RADIUS:
        out = np.ones_like(u)
    elif kind is QuantityKind.ASPECT_RATIO:
        out = 1.0 / (2.0 * h * np.sqrt(u))
    elif kind is QuantityKind.SURFACE_AREA:
        out = TWO_PI * (1.0 + h / (2.0 * np.sqrt(u)))
    else:
        out = math.pi * h
    return _ret(np.asarray(out, dtype=float))


@dataclass(frozen=True)
class Observation:
    """One cut-plane rectangle: squared half-width ``z`` and height ``h``."""

    z: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.z) and math.isfinite(self.h)):
            raise DomainError("observation must be finite")
        if self.z <= 0 or self.h <= 0:
            raise DomainError("observation must satisfy z > 0 and h > 0")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Immutable set of validated observations, stored column-wise.

    Attributes
    ----------
    z, h : ndarray
        Read-only arrays of squared half-widths and heights.
    rejected : tuple of int
        Positions (in the raw input) that failed validation.
    """

    z: np.ndarray
    h: np.ndarray
    rejected: tuple = field(default=())

    def __post_init__(self):
        z, h = _frozen(self.z), _frozen(self.h)
        if z.shape != h.shape:
            raise ValueError("z and h must have the same length")
        if z.size == 0:
            raise EmptyObservationError("observation set is empty")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(h))):
            raise DomainError("observations must be finite")
        if np.any(z <= 0) or np.any(h <= 0):
            raise DomainError("observations must satisfy z > 0 and h > 0")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "rejected", tuple(self.rejected))

    @property
    def n(self) -> int:
        return int(self.z.size)

    @property
    def items(self) -> tuple:
        return tuple(Observation(float(a), float(b)) for a, b in zip(self.z, self.h))

    def __len__(self) -> int:
        return self.n

    def poles(self, kind: QuantityKind) -> np.ndarray:
        """Values ``p(H_i; Z_i)`` where the plug-in estimator has poles."""
        return p_transform(kind, self.h, self.z)

    def scaled(self, c: float) -> "ObservationSet":
        """Same rectangles with all lengths multiplied by ``c``."""
        return ObservationSet(self.z * c * c, self.h * c)


@dataclass(frozen=True, eq=False)
class CylinderSample:
    """Squared radii ``x`` and heights ``h`` of a sample of 3D cylinders."""

    x: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        x, h = _frozen(self.x), _frozen(self.h)
        if x.shape != h.shape:
            raise ValueError("x and h must have the same length")
        if np.any(x <= 0) or np.any(h <= 0):
            raise DomainError("cylinders must satisfy x > 0 and h > 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def mean_radius(self) -> float:
        """Sample analogue of ``E_f[sqrt(X)]``."""
        return float(np.mean(np.sqrt(self.x)))

    def quantity(self, kind: QuantityKind) -> np.ndarray:
        return p_transform(kind, self.h, self.x)


def validate(pairs: "Iterable[Sequence[float]] | np.ndarray") -> ObservationSet:
    """Build an :class:`ObservationSet`, dropping invalid rows.

    Rows with a non-finite or non-positive entry are rejected; their
    positions are kept in ``ObservationSet.rejected``.

    Raises
    ------
    EmptyObservationError
        If no row survives.
    """
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=float)
    if arr.size == 0:
        raise EmptyObservationError("no observations given")
    arr = arr.reshape(-1, 2)
    z, h = arr[:, 0], arr[:, 1]
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(z) & np.isfinite(h) & (z > 0) & (h > 0)
    if not ok.any():
        raise EmptyObservationError(f"all {arr.shape[0]} observations were rejected")
    return ObservationSet(z[ok], h[ok], rejected=tuple(int(i) for i in np.flatnonzero(~ok)))
