"""Command line interface: ``cylstereo estimate | simulate | table3``.

Input is a comma separated file with a header naming either
``width,height`` (full rectangle width) or ``z,h`` (squared half-width).
Outputs are tab separated grids plus a JSON summary, written atomically.

Exit codes: 0 success, 2 invalid input or arguments, 3 numerical failure.
The log level is read from ``CYLSTEREO_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .asymptotics import (
    BandwidthConfig,
    ci,
    var_cdf_isotonic,
    var_covariance,
    var_height_cdf,
    var_moment,
)
from .geometry import DomainError, EmptyObservationError, ObservationSet, QuantityKind, validate
from .isotonic import fit_isotonic
from .plugin import (
    Moment,
    PoleError,
    avoid_poles,
    covariance_hat,
    height_cdf_unweighted,
    height_cdf_weighted,
    moments,
    plugin_cdf,
)
from .simulation import MODES, SamplingError, SimulationSpec, run_table3

__all__ = [
    "SchemaError",
    "GridSpec",
    "IngestReport",
    "RunConfig",
    "ingest",
    "parse_grid",
    "auto_grid",
    "cmd_estimate",
    "cmd_simulate",
    "cmd_table3",
    "main",
]

log = logging.getLogger("cylstereo")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
SCHEMAS = {
    "width": (("width", "w"), ("height", "h")),
    "z": (("z",), ("h", "height")),
}
HEIGHT = "height"
DEFAULT_KINDS = "vol,surf,ratio,sqradius,height"
AUTO_POINTS = 256
AUTO_QUANTILES = (0.005, 0.995)
CDF_COLUMNS = ("t", "F_plugin", "F_isotonic", "ci_lower", "ci_upper")
HEIGHT_COLUMNS = ("h", "F_weighted", "F_unweighted", "ci_lower", "ci_upper")


class SchemaError(ValueError):
    """Input header does not match the declared schema."""


# -- input ------------------------------------------------------------------


@dataclass(frozen=True)
class IngestReport:
    """Rows read and the 1-based file line numbers of rejected rows."""

    rows: int
    rejected_lines: tuple

    @property
    def accepted(self) -> int:
        return self.rows - len(self.rejected_lines)


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def ingest(path, schema: str = "z"):
    """Read observations from a CSV file.

    Parameters
    ----------
    path : path-like
    schema : {"width", "z"}
        ``"width"`` expects columns ``width,height`` and converts
        ``z = (width / 2)^2``; ``"z"`` expects ``z,h``.  Header names are
        case-insensitive; extra columns are ignored.

    Returns
    -------
    ObservationSet, IngestReport
    """
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip().lower() for c in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        cols = []
        for aliases in SCHEMAS[schema]:
            found = [header.index(a) for a in aliases if a in header]
            if not found:
                raise SchemaError(f"{path}: header {header} lacks a column named {' or '.join(aliases)}")
            cols.append(found[0])
        values, lines = [], []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            lines.append(reader.line_num)
            cells = [row[c] if c < len(row) else "" for c in cols]
            values.append([_to_float(c) for c in cells])
    if not values:
        raise EmptyObservationError(f"{path}: no data rows")
    arr = np.asarray(values, dtype=float)
    if schema == "width":
        arr[:, 0] = (0.5 * arr[:, 0]) ** 2
    obs = validate(arr)
    report = IngestReport(len(values), tuple(lines[i] for i in obs.rejected))
    if report.rejected_lines:
        log.warning("rejected %d row(s) at line(s) %s", len(report.rejected_lines), list(report.rejected_lines))
    return obs, report


# -- grids ------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and 0 <= self.lo < self.hi):
            raise ValueError("grid needs 0 <= MIN < MAX")
        if self.spacing not in ("linear", "log"):
            raise ValueError("grid spacing must be 'linear' or 'log'")
        if self.spacing == "log" and self.lo <= 0:
            raise ValueError("log grid needs MIN > 0")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


def parse_grid(text: str) -> GridSpec | None:
    """Parse ``auto`` (returns None) or ``MIN:MAX:POINTS[:linear|log]``."""
    if text == "auto":
        return None
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"bad grid {text!r}; expected MIN:MAX:POINTS[:linear|log]")
    spacing = parts[3] if len(parts) == 4 else "linear"
    return GridSpec(float(parts[0]), float(parts[1]), int(parts[2]), spacing)


def auto_grid(values, points: int = AUTO_POINTS) -> np.ndarray:
    """Log-spaced grid between the 0.5% and 99.5% quantiles of ``values``."""
    lo, hi = np.quantile(values, AUTO_QUANTILES)
    if not hi > lo:
        lo, hi = 0.5 * hi, 2.0 * hi
    return np.geomspace(lo, hi, points)


# -- output -----------------------------------------------------------------


def _fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(columns, arrays) -> str:
    lines = ["\t".join(columns)]
    lines += ["\t".join(_fmt(v) for v in row) for row in zip(*arrays)]
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# -- commands ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Path | None = None
    schema: str = "z"
    kinds: tuple = ()
    grid: GridSpec | None = None
    c_b: float = 1.0
    seed: int | None = 0
    n: int = 0
    mode: str = "direct"
    replicates: int = 1
    out: Path | None = None
    iso_zero: str = "isotonic"


def _parse_kinds(text: str) -> tuple:
    out = []
    for name in (s.strip() for s in text.split(",")):
        if not name:
            continue
        out.append(HEIGHT if name.lower() == HEIGHT else QuantityKind.parse(name))
    if not out:
        raise ValueError("no kinds given")
    return tuple(dict.fromkeys(out))


def _band(estimate, nu2, n):
    est = np.asarray(estimate, dtype=float)
    if n < 2:
        nan = np.full(est.shape, math.nan)
        return nan, nan
    nu2 = np.maximum(np.asarray(nu2, dtype=float), 0.0)
    half = np.array([ci(0.0, v, n).half_width for v in np.broadcast_to(nu2, est.shape)])
    return np.clip(est - half, 0.0, 1.0), np.clip(est + half, 0.0, 1.0)


def _estimate_kind(obs, kind, grid_spec, bw, zero="isotonic"):
    grid = auto_grid(obs.poles(kind)) if grid_spec is None else grid_spec.values()
    grid, moved = avoid_poles(obs, kind, grid)
    if moved.size:
        log.info("%s: moved %d grid point(s) off poles", kind.short, moved.size)
    plug = plugin_cdf(obs, kind, grid)
    fit = fit_isotonic(obs, kind)
    f_iso = np.asarray(fit.cdf(grid, zero=zero), dtype=float)
    nu2 = var_cdf_isotonic(obs, kind, grid, bw, fit=fit, zero=zero) if obs.n >= 2 else np.full(grid.shape, math.nan)
    lower, upper = _band(f_iso, nu2, obs.n)
    text = _table(CDF_COLUMNS, (grid, plug.f, f_iso, lower, upper))
    meta = {
        "points": int(grid.size),
        "moved_off_poles": int(moved.size),
        "F_plugin_monotone": bool(np.all(np.diff(plug.f) >= 0)),
        "N_hat_zero": fit.n_zero,
        "N_tilde_zero": fit.n_tilde_zero,
        "isotonic_zero": zero,
    }
    return text, meta


def _estimate_height(obs, grid_spec, bw):
    grid = auto_grid(obs.h) if grid_spec is None else grid_spec.values()
    fw = np.asarray(height_cdf_weighted(obs, grid), dtype=float)
    fu = np.asarray(height_cdf_unweighted(obs, grid), dtype=float)
    nu2 = var_height_cdf(obs, grid, bw) if obs.n >= 2 else np.full(grid.shape, math.nan)
    lower, upper = _band(fw, nu2, obs.n)
    return _table(HEIGHT_COLUMNS, (grid, fw, fu, lower, upper)), {"points": int(grid.size)}


def _summary(obs, bw):
    m = moments(obs)
    out = {}
    for which in Moment:
        est = m.get(which)
        if obs.n >= 2:
            out[which.value] = ci(est, var_moment(obs, which, bw), obs.n).as_dict()
        else:
            out[which.value] = {"estimate": est}
    cov = None
    if obs.n >= 2:
        cov = ci(covariance_hat(obs), var_covariance(obs, bw), obs.n).as_dict()
    return out, cov


def cmd_estimate(cfg: RunConfig) -> dict:
    """Estimate distributions, moments and covariance from an input file.

    Writes ``<kind>.tsv`` per quantity kind, ``height.tsv`` and
    ``summary.json`` into ``cfg.out``; returns the summary.
    """
    obs, report = ingest(cfg.input, cfg.schema)
    return estimate_observations(obs, cfg, report)


def estimate_observations(obs: ObservationSet, cfg: RunConfig, report: IngestReport | None = None) -> dict:
    """The body of :func:`cmd_estimate` for in-memory observations."""
    out = Path(cfg.out)
    bw = BandwidthConfig(cfg.c_b)
    b = bw.bandwidth(obs)
    files, kinds_meta = {}, {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for kind in cfg.kinds:
            if kind == HEIGHT:
                text, meta = _estimate_height(obs, cfg.grid, bw)
                name = "height.tsv"
            else:
                text, meta = _estimate_kind(obs, kind, cfg.grid, bw, cfg.iso_zero)
                name = f"{kind.short}.tsv"
            _atomic_write(out / name, text)
            files[HEIGHT if kind == HEIGHT else kind.short] = name
            kinds_meta[name] = meta
        moment_block, cov = _summary(obs, bw)
    notes = sorted({str(w.message) for w in caught})
    for note in notes:
        log.warning("%s", note)
    summary = {
        "n": obs.n,
        "rows": report.rows if report else obs.n,
        "rejected_lines": list(report.rejected_lines) if report else [],
        "bandwidth": {"c_b": cfg.c_b, "b_n": b, "normalize": bw.normalize},
        "backend": kernels.BACKEND,
        "moments": moment_block,
        "covariance": cov,
        "files": files,
        "grids": kinds_meta,
        "warnings": notes,
    }
    _atomic_write(out / "summary.json", json.dumps(_jsonable(summary), indent=2, allow_nan=False) + "\n")
    return summary


def observations_csv(obs: ObservationSet) -> str:
    """``z,h`` CSV text with round-trip exact floats."""
    lines = ["z,h"] + [f"{repr(float(z))},{repr(float(h))}" for z, h in zip(obs.z, obs.h)]
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig) -> ObservationSet:
    """Write a synthetic ``z,h`` CSV from the worked example."""
    obs = SimulationSpec(cfg.n, cfg.seed, cfg.mode).draw()
    _atomic_write(Path(cfg.out), observations_csv(obs))
    return obs


def cmd_table3(cfg: RunConfig, sizes=None):
    """Run the replicated covariance experiment and write its TSV report."""
    kwargs = {} if sizes is None else {"sizes": sizes}
    report = run_table3(
        cfg.replicates,
        cfg.seed,
        mode=cfg.mode,
        bw=BandwidthConfig(cfg.c_b),
        progress=lambda n: log.info("finished n=%d", n),
        **kwargs,
    )
    _atomic_write(Path(cfg.out), report.to_tsv())
    return report


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cylstereo", description="Estimate cylinder size distributions from planar rectangle profiles."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate CDFs, moments and covariance from a CSV file")
    est.add_argument("--input", required=True, type=Path)
    est.add_argument("--schema", choices=sorted(SCHEMAS), default="z")
    est.add_argument("--kinds", default=DEFAULT_KINDS, help=f"comma separated (default {DEFAULT_KINDS})")
    est.add_argument("--grid", default="auto", help="auto or MIN:MAX:POINTS[:linear|log]")
    est.add_argument("--cb", type=float, default=1.0, help="bandwidth constant c_b (default 1)")
    est.add_argument(
        "--isotonic-zero",
        choices=("isotonic", "plugin"),
        default="isotonic",
        help="normalize the isotonic CDF by the isotonic (default) or plug-in estimate at 0",
    )
    est.add_argument("--out", required=True, type=Path, help="output directory")

    sim = sub.add_parser("simulate", help="write a synthetic observation CSV")
    sim.add_argument("--n", required=True, type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--mode", choices=MODES, default="direct")
    sim.add_argument("--out", required=True, type=Path)

    t3 = sub.add_parser("table3", help="replicated covariance estimation report")
    t3.add_argument("--replicates", type=int, default=1000)
    t3.add_argument("--seed", type=int, default=0)
    t3.add_argument("--sizes", default=None, help="comma separated sample sizes (default 50,500,5000,50000)")
    t3.add_argument("--mode", choices=MODES, default="direct")
    t3.add_argument("--cb", type=float, default=1.0)
    t3.add_argument("--out", required=True, type=Path)
    return parser


def _config(args) -> RunConfig:
    if args.command == "estimate":
        return RunConfig(
            "estimate",
            input=args.input,
            schema=args.schema,
            kinds=_parse_kinds(args.kinds),
            grid=parse_grid(args.grid),
            c_b=args.cb,
            out=args.out,
            iso_zero=args.isotonic_zero,
        )
    if args.command == "simulate":
        if args.n < 1:
            raise ValueError("--n must be >= 1")
        return RunConfig("simulate", n=args.n, seed=args.seed, mode=args.mode, out=args.out)
    if args.replicates < 1:
        raise ValueError("--replicates must be >= 1")
    return RunConfig("table3", seed=args.seed, mode=args.mode, replicates=args.replicates, c_b=args.cb, out=args.out)


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CYLSTEREO_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if cfg.command == "estimate":
            cmd_estimate(cfg)
        elif cfg.command == "simulate":
            cmd_simulate(cfg)
        else:
            sizes = None if args.sizes is None else tuple(int(s) for s in args.sizes.split(","))
            cmd_table3(cfg, sizes)
    except (PoleError, SamplingError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (SchemaError, EmptyObservationError, DomainError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
