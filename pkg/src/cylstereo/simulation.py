"""Worked example: Gamma(3) radii with triangular heights.

Three-dimensional model::

    f_X(x) = x^2 e^{-x} / 2,            x >= 0
    f_{H|X}(h|x) = 2 (x - h) / x^2,     0 < h < x

Observable model on the cut plane (squared half-width ``Z``, height ``H``)::

    g(z, h) = (4/15) e^{-z} * 2 (1/2 + z - h)                          h < z
    g(z, h) = (4/15) e^{-z} * 2 [(1/2 + z - h) Gamma(1/2, h - z)
                                 + sqrt(h - z) e^{-(h - z)}] / sqrt(pi)  h > z

with marginal ``g_Z(z) = (4/15)(z^2 + z + 3/4) e^{-z}``.

Also here: a brute-force slicing sampler, analytic and Monte Carlo oracles
for the truth, and the replicated covariance experiment.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .asymptotics import BandwidthConfig, covariance_variance_formula, rate, var_covariance
from .geometry import CylinderSample, ObservationSet
from .plugin import HALF_PI, covariance_hat

__all__ = [
    "SamplingError",
    "SimulationSpec",
    "SliceWorld",
    "sample_cylinders",
    "sample_3d",
    "sample_2d_direct",
    "populate_world",
    "slice_oracle",
    "g_z",
    "G_z",
    "g_joint",
    "g_h_given_z",
    "branch2_kernel",
    "branch2_envelope",
    "analytic_F_V",
    "monte_carlo_F_V",
    "f_moment",
    "g_moment",
    "xi_true",
    "true_covariance",
    "true_nu2",
    "Table3Row",
    "Table3Report",
    "run_table3",
    "TABLE3_SIZES",
]

SQRT_PI = math.sqrt(math.pi)
TABLE3_SIZES = (50, 500, 5000, 50000)

# g_Z is a mixture of Gamma(3), Gamma(2) and Exp(1):
# (4/15)(z^2 + z + 3/4) e^{-z} = 8/15 * z^2 e^{-z}/2 + 4/15 * z e^{-z} + 3/15 * e^{-z}
_Z_WEIGHTS = np.array([8.0, 4.0, 3.0]) / 15.0
_Z_SHAPES = np.array([3.0, 2.0, 1.0])

# tail branch of g_{H|Z}: envelope 2 e^{-s} over a kernel of total mass 3/4
_ENVELOPE_SCALE = 2.0
MIN_ACCEPTANCE = 0.2


class SamplingError(RuntimeError):
    """Rejection sampler accepted too few proposals (envelope is broken)."""


MODES = ("direct", "slice")


@dataclass(frozen=True)
class SimulationSpec:
    """Sample size, seed and sampler for the worked example.

    ``mode`` is ``"direct"`` (draw from the observable density) or
    ``"slice"`` (cut a simulated 3D population).  Replicate streams are
    spawned from ``seed`` with :class:`numpy.random.SeedSequence`.
    """

    n: int
    seed: int | None = 0
    mode: str = "direct"
    replicates: int = 1

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be >= 1")
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def replicate_rngs(self) -> list:
        children = np.random.SeedSequence(self.seed).spawn(self.replicates)
        return [np.random.default_rng(c) for c in children]

    def draw(self, rng: np.random.Generator | None = None) -> ObservationSet:
        sampler = sample_2d_direct if self.mode == "direct" else slice_oracle
        return sampler(self, rng=rng)


# -- 3D model ---------------------------------------------------------------


def sample_cylinders(rng: np.random.Generator, size: int):
    """Draw ``(x, h)`` from the Gamma(3) / triangular model."""
    x = rng.gamma(3.0, 1.0, size)
    # H / X has density 2(1 - r) on [0, 1]; invert 1 - (1 - r)^2
    h = x * (1.0 - np.sqrt(rng.random(size)))
    return x, h


def sample_3d(spec: SimulationSpec, rng: np.random.Generator | None = None) -> CylinderSample:
    """Draw ``spec.n`` cylinders from the 3D model."""
    rng = spec.rng() if rng is None else rng
    x, h = sample_cylinders(rng, spec.n)
    return CylinderSample(x, h)


# -- observable model -------------------------------------------------------


def g_z(z):
    """Marginal density of ``Z``."""
    z = np.asarray(z, dtype=float)
    out = np.where(z >= 0, (4.0 / 15.0) * (z * z + z + 0.75) * np.exp(-np.maximum(z, 0.0)), 0.0)
    return out.item() if out.ndim == 0 else out


def G_z(z):
    """Distribution function of ``Z``."""
    z = np.asarray(z, dtype=float)
    zp = np.maximum(z, 0.0)
    out = np.where(z > 0, 1.0 - (4.0 / 15.0) * (zp * zp + 3.0 * zp + 3.75) * np.exp(-zp), 0.0)
    return out.item() if out.ndim == 0 else out


def branch2_kernel(s):
    """Unnormalised ``g(z, z + s) * 15 e^z / 4`` for ``s >= 0``; integrates to 3/4."""
    s = np.asarray(s, dtype=float)
    rs = np.sqrt(s)
    return 2.0 * (0.5 - s) * special.erfc(rs) + (2.0 / SQRT_PI) * rs * np.exp(-s)


def branch2_envelope(s):
    """Dominating function ``2 e^{-s}`` for :func:`branch2_kernel`."""
    return _ENVELOPE_SCALE * np.exp(-np.asarray(s, dtype=float))


def _branch2_ratio(s):
    # kernel / envelope, written with erfcx to stay finite for large s
    rs = np.sqrt(s)
    return (0.5 - s) * special.erfcx(rs) + rs / SQRT_PI


def g_h_given_z(h, z):
    """Conditional density of ``H`` given ``Z = z``, evaluated literally."""
    h, z = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(z, dtype=float))
    denom = z * z + z + 0.75
    lin = 2.0 * (0.5 + z - h)
    s = np.maximum(h - z, 0.0)
    upper_gamma = special.gammaincc(0.5, s) * special.gamma(0.5)
    tail = 2.0 * ((0.5 + z - h) * upper_gamma + np.sqrt(s) * np.exp(-s)) / SQRT_PI
    out = np.where((h > 0) & (h < z), lin, np.where(h > z, tail, 0.0)) / denom
    out = np.where(z >= 0, out, 0.0)
    return out.item() if out.ndim == 0 else out


def g_joint(z, h):
    """Joint density ``g(z, h)`` of the observables."""
    return g_z(z) * g_h_given_z(h, z)


def _sample_z(rng, n):
    comp = rng.choice(3, size=n, p=_Z_WEIGHTS)
    return rng.gamma(_Z_SHAPES[comp], 1.0)


def _sample_tail(rng, n):
    """Draw ``s = h - z`` from the tail branch by rejection against ``Exp(1)``."""
    out = np.empty(n)
    todo = np.arange(n)
    proposed = accepted = 0
    while todo.size:
        s = rng.exponential(1.0, todo.size)
        keep = rng.random(todo.size) < _branch2_ratio(s)
        proposed += todo.size
        accepted += int(np.count_nonzero(keep))
        out[todo[keep]] = s[keep]
        todo = todo[~keep]
        if proposed >= 1000 and accepted < MIN_ACCEPTANCE * proposed:
            raise SamplingError(f"acceptance rate {accepted / proposed:.3f} below floor {MIN_ACCEPTANCE}")
    return out


def sample_2d_direct(spec: SimulationSpec, rng: np.random.Generator | None = None) -> ObservationSet:
    """Draw ``spec.n`` pairs ``(Z, H)`` from the observable model.

    ``Z`` comes from its three-component gamma mixture.  Given ``Z = z``,
    ``H < z`` with probability ``(z^2 + z) / (z^2 + z + 3/4)``; that branch
    has a linear density and is inverted exactly.  Otherwise ``H = z + s``
    with ``s`` drawn by rejection from ``2 e^{-s}`` (acceptance 3/8).
    """
    rng = spec.rng() if rng is None else rng
    n = spec.n
    z = _sample_z(rng, n)
    lin_mass = z * z + z
    low = rng.random(n) * (lin_mass + 0.75) < lin_mass
    h = np.empty(n)
    zl = z[low]
    a = 0.5 + zl
    u = rng.random(zl.size) * (a * zl - 0.5 * zl * zl)
    h[low] = a - np.sqrt(a * a - 2.0 * u)
    h[~low] = z[~low] + _sample_tail(rng, int(np.count_nonzero(~low)))
    # the linear branch can round to exactly 0 for tiny z
    h = np.maximum(h, np.finfo(float).tiny)
    return ObservationSet(z, h)


# -- slicing oracle ---------------------------------------------------------

Sampler = Callable[[np.random.Generator, int], tuple]


def _default_box_side() -> float:
    from scipy import stats

    return 20.0 * math.sqrt(stats.gamma.ppf(0.999, 3.0))


@dataclass(frozen=True, eq=False)
class SliceWorld:
    """Cylinders with parallel axes in a slab ``[0, box_side]`` cut by a plane.

    Only the coordinate perpendicular to the plane matters: a cylinder of
    radius ``sqrt(x)`` centred at distance ``d`` from the plane is hit iff
    ``d < sqrt(x)``, and its profile has squared half-width ``x - d^2``.
    """

    centre: np.ndarray
    x: np.ndarray
    h: np.ndarray
    box_side: float
    plane: float = field(default=None)

    def __post_init__(self):
        if self.plane is None:
            object.__setattr__(self, "plane", 0.5 * self.box_side)
        if not 0.0 <= self.plane <= self.box_side:
            raise ValueError("plane must lie inside the box")

    @property
    def hit(self) -> np.ndarray:
        return np.abs(self.centre - self.plane) < np.sqrt(self.x)

    def cut(self) -> ObservationSet:
        hit = self.hit
        d = self.centre[hit] - self.plane
        return ObservationSet(self.x[hit] - d * d, self.h[hit])


def populate_world(
    rng: np.random.Generator, n_cylinders: int, box_side: float | None = None, sampler: Sampler = sample_cylinders
) -> SliceWorld:
    """Place ``n_cylinders`` cylinders with uniform centres in the box."""
    box_side = _default_box_side() if box_side is None else float(box_side)
    x, h = sampler(rng, n_cylinders)
    centre = rng.uniform(0.0, box_side, n_cylinders)
    return SliceWorld(centre, np.asarray(x, dtype=float), np.asarray(h, dtype=float), box_side)


def slice_oracle(
    spec: SimulationSpec,
    rng: np.random.Generator | None = None,
    box_side: float | None = None,
    sampler: Sampler = sample_cylinders,
) -> ObservationSet:
    """Cut simulated 3D populations until ``spec.n`` profiles are observed.

    The box side defaults to 20 times the 99.9% quantile of the radius, so
    boundary effects are negligible.  Profiles are returned in the order
    their cylinders were generated.
    """
    rng = spec.rng() if rng is None else rng
    box_side = _default_box_side() if box_side is None else float(box_side)
    zs, hs, have = [], [], 0
    batch = max(1024, 16 * spec.n)
    while have < spec.n:
        cut = populate_world(rng, batch, box_side, sampler).cut()
        zs.append(cut.z)
        hs.append(cut.h)
        have += cut.n
    z = np.concatenate(zs)[: spec.n]
    h = np.concatenate(hs)[: spec.n]
    # z = x - d^2 > 0 always, but can underflow to 0 at the slab edge
    return ObservationSet(np.maximum(z, np.finfo(float).tiny), h)


# -- volume distribution ----------------------------------------------------


def analytic_F_V(v):
    """Distribution function of the cylinder volume ``pi X H`` in the 3D model."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(np.isnan(v)):
        raise ValueError("v must be >= 0")
    s = np.sqrt(v / math.pi)
    with np.errstate(over="ignore", invalid="ignore"):
        poly = (1.0 + s - 0.5 * s * s + 0.5 * s**3) * np.exp(-s)
        tail = np.where(s > 0, 0.5 * s**4 * special.exp1(np.where(s > 0, s, 1.0)), 0.0)
    out = np.clip(np.where(np.isinf(s), 1.0, 1.0 - poly + tail), 0.0, 1.0)
    return out.item() if out.ndim == 0 else out


def monte_carlo_F_V(v, n_draws: int, rng: np.random.Generator, size_biased: bool = False):
    """Monte Carlo distribution function of ``pi X H``.

    With ``size_biased=True`` each cylinder is weighted by its radius,
    giving the law of the volumes of cylinders hit by a cut.
    """
    x, h = sample_cylinders(rng, n_draws)
    vol = math.pi * x * h
    order = np.argsort(vol)
    vol = vol[order]
    w = np.sqrt(x[order]) if size_biased else np.ones(n_draws)
    cw = np.concatenate([[0.0], np.cumsum(w)])
    k = np.searchsorted(vol, np.asarray(v, dtype=float), side="right")
    out = cw[k] / cw[-1]
    return out.item() if np.ndim(out) == 0 else out


# -- exact moments by quadrature --------------------------------------------

_QUAD = dict(epsabs=1e-13, epsrel=1e-11, limit=200)


def _quad(fn, a, b):
    val, err = integrate.quad(fn, a, b, **_QUAD)
    if not math.isfinite(val) or err > 1e-7 * max(1.0, abs(val)):
        raise ArithmeticError(f"quadrature did not converge (value {val}, error {err})")
    return val


def f_moment(a: float, b: float) -> float:
    """``E_f[X^a H^b]`` by nested quadrature over the 3D model."""

    def inner(x):
        if x <= 0:
            return 0.0
        return _quad(lambda h: h**b * 2.0 * (x - h) / (x * x), 0.0, x)

    return _quad(lambda x: 0.5 * x * x * math.exp(-x) * x**a * inner(x), 0.0, math.inf)


def _tail_kernel(s):
    rs = math.sqrt(s)
    return 2.0 * (0.5 - s) * math.erfc(rs) + (2.0 / SQRT_PI) * rs * math.exp(-s)


def _h_integral(z, b):
    """``int h^b g(z, h) dh * 15 e^z / 4``."""
    low = _quad(lambda h: h**b * 2.0 * (0.5 + z - h), 0.0, z) if z > 0 else 0.0
    high = _quad(lambda s: (z + s) ** b * _tail_kernel(s), 0.0, math.inf)
    return low + high


def g_moment(a: float, b: float) -> float:
    """``E_g[Z^a H^b]`` by nested quadrature over the observable model.

    ``a = -1/2`` is handled by the substitution ``z = w^2``.
    """
    c = 4.0 / 15.0
    if a == -0.5:
        return _quad(lambda w: 2.0 * c * math.exp(-w * w) * _h_integral(w * w, b), 0.0, math.inf)
    return _quad(lambda z: c * math.exp(-z) * z**a * _h_integral(z, b), 0.0, math.inf)


def xi_true(j: int) -> float:
    """``xi_j = int h^j g(0, h) dh`` by quadrature."""
    return (4.0 / 15.0) * _h_integral(0.0, j)


def true_covariance(side: str = "f") -> float:
    """Cov(sqrt X, H) in the worked example.

    ``side="f"`` integrates the 3D model; ``side="g"`` uses observable
    moments of the cut-plane model.
    """
    if side == "f":
        return f_moment(0.5, 1.0) - f_moment(0.5, 0.0) * f_moment(0.0, 1.0)
    if side == "g":
        u, v, m_h = g_moment(-0.5, 0.0), g_moment(-0.5, 1.0), g_moment(0.0, 1.0)
        return HALF_PI * m_h / u - HALF_PI * v / (u * u)
    raise ValueError("side must be 'f' or 'g'")


def true_nu2(side: str = "g") -> float:
    """Asymptotic variance of the covariance estimator in the worked example.

    ``side="g"`` integrates the observable model; ``side="f"`` evaluates the
    same expression through 3D-model moments, using
    ``E_g[Z^-1/2] = (pi/2)/E[X^1/2]``, ``E_g[Z^-1/2 H] = (pi/2) E[H]/E[X^1/2]``,
    ``E_g[H] = E[X^1/2 H]/E[X^1/2]`` and
    ``xi_j = E[X^-1/2 H^j] / (2 E[X^1/2])``.
    """
    if side == "g":
        return covariance_variance_formula(
            g_moment(-0.5, 0.0), g_moment(-0.5, 1.0), g_moment(0.0, 1.0), xi_true(0), xi_true(1), xi_true(2)
        )
    if side == "f":
        s = f_moment(0.5, 0.0)
        e_h = f_moment(0.0, 1.0)
        a = f_moment(0.5, 1.0)
        m0, m1, m2 = (f_moment(-0.5, j) for j in (0, 1, 2))
        braces = m0 * (4.0 * s * s * e_h * e_h - 4.0 * e_h * a * s + a * a) + 2.0 * m1 * (a * s - e_h * s * s) + m2 * s * s
        return HALF_PI**-2 * s * braces / 2.0
    raise ValueError("side must be 'f' or 'g'")


# -- replicated covariance experiment ---------------------------------------


@dataclass(frozen=True)
class Table3Row:
    n: float
    sigma_hat: float
    nu2_hat: float
    half_width: float
    mean_sigma: float


@dataclass(frozen=True)
class Table3Report:
    rows: tuple
    replicates: int
    seed: int | None

    COLUMNS = ("n", "sigma_hat", "nu2_hat", "half_width", "mean_sigma")

    def to_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("\t".join(self.COLUMNS) + "\n")
        for r in self.rows:
            n = "inf" if math.isinf(r.n) else str(int(r.n))
            vals = [r.sigma_hat, r.nu2_hat, r.half_width, r.mean_sigma]
            buf.write("\t".join([n] + ["nan" if math.isnan(v) else repr(float(v)) for v in vals]) + "\n")
        return buf.getvalue()


def run_table3(
    replicates: int = 1000,
    seed: int | None = 0,
    sizes=TABLE3_SIZES,
    mode: str = "direct",
    bw: BandwidthConfig | None = None,
    progress: Callable[[int], None] | None = None,
) -> Table3Report:
    """Replicated covariance estimation.

    For each ``n`` the first replicate supplies the single-run columns
    (estimate, variance estimate and CI half-width); the last column is the
    mean estimate over all replicates.  A final row holds the exact values.
    Each ``n`` gets its own child of ``SeedSequence(seed)``, and each
    replicate a grandchild, so rows are reproducible independently.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    rows = []
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    for n, child in zip(sizes, children):
        spec = SimulationSpec(int(n), seed, mode, replicates)
        sigmas = np.empty(replicates)
        single_nu2 = math.nan
        for r, ss in enumerate(child.spawn(replicates)):
            obs = spec.draw(np.random.default_rng(ss))
            sigmas[r] = covariance_hat(obs)
            if r == 0:
                single_nu2 = var_covariance(obs, bw)
        half = 1.96 * math.sqrt(max(single_nu2, 0.0)) * rate(int(n))
        rows.append(Table3Row(int(n), float(sigmas[0]), single_nu2, half, math.fsum(sigmas) / replicates))
        if progress is not None:
            progress(int(n))
    cov = true_covariance()
    rows.append(Table3Row(math.inf, cov, true_nu2(), math.nan, cov))
    return Table3Report(tuple(rows), replicates, seed)
