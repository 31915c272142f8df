"""Probe series, oscillation detection, front tracking, exact and reference solutions, norms."""

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericalFailure
from .flux import SpatialOperatorConfig
from .grid import REFERENCE_N, Field, fmt

log = logging.getLogger(__name__)

CACHE_VERSION = 1
NORMS = ("l1", "l2", "linf")


@dataclass
class ProbeSeries:
    x_probe: float
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.t.shape != self.p.shape:
            raise ValueError("probe times and values differ in length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("probe times must be strictly increasing")

    def window(self, t0, t1):
        """Samples with t0 < t <= t1."""
        keep = (self.t > t0) & (self.t <= t1)
        return ProbeSeries(self.x_probe, self.t[keep], self.p[keep])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "p"])
            for t, p in zip(self.t, self.p):
                w.writerow([fmt(t), fmt(p)])


@dataclass
class OscillationReport:
    n_maxima: int
    n_minima: int
    max_amplitude: float
    period_estimate: float  # NaN with fewer than two minima
    minima_times: list
    maxima_times: list = dc_field(default_factory=list)

    def to_dict(self):
        period = None if np.isnan(self.period_estimate) else self.period_estimate
        return {"n_maxima": self.n_maxima, "n_minima": self.n_minima,
                "max_amplitude": self.max_amplitude, "period_estimate": period,
                "minima_times": self.minima_times, "maxima_times": self.maxima_times}


def detect_oscillations(series, noise_floor=1e-10):
    """Count temporal extrema of a probe series.

    An interior sample is a maximum (minimum) when it exceeds (falls below)
    both neighbours by more than ``noise_floor``.  The amplitude is the
    largest gap between a peak and an adjacent trough.
    """
    p = np.asarray(series.p, dtype=float)
    t = np.asarray(series.t, dtype=float)
    if p.size < 3:
        raise ValueError("oscillation detection needs at least three samples")
    if noise_floor < 0:
        raise ValueError("noise_floor must be non-negative")
    mid, left, right = p[1:-1], p[:-2], p[2:]
    maxima = np.flatnonzero((mid - left > noise_floor) & (mid - right > noise_floor)) + 1
    minima = np.flatnonzero((left - mid > noise_floor) & (right - mid > noise_floor)) + 1
    idx = np.sort(np.concatenate([maxima, minima]))
    kind = np.isin(idx, maxima)
    amplitude = 0.0
    for a, b, ka, kb in zip(idx[:-1], idx[1:], kind[:-1], kind[1:]):
        if ka != kb:
            amplitude = max(amplitude, abs(p[b] - p[a]))
    period = float(np.mean(np.diff(t[minima]))) if minima.size >= 2 else float("nan")
    return OscillationReport(int(maxima.size), int(minima.size), float(amplitude), period,
                             t[minima].tolist(), t[maxima].tolist())


def track_front(field, threshold, grid):
    """Right-most position where p crosses ``threshold``, linearly interpolated.

    Returns x_left when no node exceeds the threshold.
    """
    p = np.asarray(getattr(field, "values", field), dtype=float)
    x = grid.x
    above = np.flatnonzero(p > threshold)
    if above.size == 0:
        return float(x[0])
    i = above[-1]
    if i == p.size - 1:
        return float(x[-1])
    return float(x[i] + (p[i] - threshold) / (p[i] - p[i + 1]) * grid.dx)


TLP_THRESHOLD = 0.05


def default_front_threshold(setup, t):
    """p_R + 5% of the jump between the boundary values at time t (0.05 for the locking problem)."""
    if setup.preset.name == "tlp":
        return TLP_THRESHOLD
    pl = float(setup.bc_left(t))
    pr = float(setup.bc_right(t))
    return pr + 0.05 * (pl - pr)


def tlp_exact(x, t, eps=1e-9):
    """Exact locking-problem solution: (3(t - x))**(1/3) behind the front, eps**(1/3) ahead."""
    x = np.asarray(x, dtype=float)
    return np.where(x < t, np.cbrt(3.0 * np.maximum(t - x, 0.0)), np.cbrt(eps))[()]


# ---------------------------------------------------------------------------
# reference solutions and error norms
# ---------------------------------------------------------------------------

def default_cache_dir():
    env = os.environ.get("GPMELAB_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "gpmelab"


def reference_key(setup, int_cfg, t_end, n_ref):
    payload = {
        "version": CACHE_VERSION,
        "setup": setup.with_grid(n_ref).to_dict(),
        "operator": SpatialOperatorConfig.arithmetic().to_dict(),
        "scheme": "fe",
        "dt_factor": _reference_dt_factor(setup, int_cfg),
        "t_end": float(t_end),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:20], payload


def _reference_dt_factor(setup, int_cfg):
    from .timestepping import TimeScheme, default_dt_factor

    if int_cfg is not None and int_cfg.scheme is not TimeScheme.BACKWARD_EULER \
            and int_cfg.dt_rule.power == "dx2":
        return float(int_cfg.dt_rule.factor)
    return default_dt_factor(setup.model)


def reference_solution(setup, int_cfg, t_end, n_ref=REFERENCE_N, cache_dir=None, use_cache=True):
    """Arithmetic-average forward-Euler solution on the N = n_ref grid, cached on disk.

    The cache key hashes the full reference configuration, so any change to
    the model, preset, step rule or end time produces a fresh run.
    """
    from .timestepping import DtRule, IntegratorConfig, simulate

    ref_setup = setup.with_grid(n_ref)
    key, payload = reference_key(setup, int_cfg, t_end, n_ref)
    path = Path(cache_dir or default_cache_dir()) / f"ref_{key}.npz"
    if use_cache and path.exists():
        with np.load(path) as data:
            return Field(data["p"].copy(), float(data["t"]))
    cfg = IntegratorConfig("fe", DtRule(payload["dt_factor"]), float(t_end))
    log.info("computing N=%d reference (%s)", n_ref, key)
    try:
        result = simulate(ref_setup, SpatialOperatorConfig.arithmetic(), cfg)
    except NumericalFailure as exc:
        raise NumericalFailure(
            f"reference run on N={n_ref} failed ({exc}); try a larger dt divisor",
            step=exc.step, node=exc.node) from exc
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.stem + f".{os.getpid()}.tmp.npz")
        np.savez(tmp, p=result.field.values, t=result.field.time,
                 meta=json.dumps(payload, sort_keys=True))
        os.replace(tmp, path)
    return result.field


def restrict(fine_values, n_coarse):
    """Values of a nested fine-grid array at the nodes of the N = n_coarse grid."""
    fine_values = np.asarray(fine_values)
    n_fine = fine_values.size - 1
    if n_coarse <= 0 or n_fine % n_coarse:
        raise ValueError(f"grid N={n_coarse} is not nested in grid N={n_fine}")
    return fine_values[:: n_fine // n_coarse]


def norm_of(e, dx, norm="l2"):
    """Grid norms of an error vector: dx-weighted l1 and l2, and max-norm."""
    e = np.abs(np.asarray(e, dtype=float))
    if norm == "l1":
        return float(dx * np.sum(e))
    if norm == "l2":
        return float(np.sqrt(dx * np.sum(e * e)))
    if norm == "linf":
        return float(np.max(e)) if e.size else 0.0
    raise ValueError(f"unknown norm {norm!r}")


def error_norms(coarse, reference, norm="l2", dx=None):
    """Norm of coarse - reference over the coarse interior nodes.

    ``coarse`` and ``reference`` are nodal arrays (or Fields) on nested uniform
    grids over the same interval; dx defaults to that of the unit interval.
    """
    c = np.asarray(getattr(coarse, "values", coarse), dtype=float)
    r = np.asarray(getattr(reference, "values", reference), dtype=float)
    n = c.size - 1
    e = c - restrict(r, n)
    return norm_of(e[1:-1], 1.0 / n if dx is None else dx, norm)


def fit_order(resolutions, errors):
    """Least-squares slope of log(error) against log(1/N)."""
    n = np.asarray(resolutions, dtype=float)
    e = np.asarray(errors, dtype=float)
    if n.size < 2 or n.size != e.size:
        raise ValueError("order fit needs at least two (N, error) pairs")
    if np.any(e <= 0) or np.any(n <= 0):
        raise ValueError("order fit needs positive errors and resolutions")
    return float(np.polyfit(np.log(1.0 / n), np.log(e), 1)[0])


@dataclass
class ConvergenceReport:
    scheme: str
    resolutions: list
    errors_l1: list = dc_field(default_factory=list)
    errors_l2: list = dc_field(default_factory=list)
    errors_linf: list = dc_field(default_factory=list)

    def errors(self, norm):
        return {"l1": self.errors_l1, "l2": self.errors_l2, "linf": self.errors_linf}[norm]

    def order(self, norm="l2"):
        """Fitted order, or None with fewer than two resolutions."""
        if len(self.resolutions) < 2:
            return None
        return fit_order(self.resolutions, self.errors(norm))

    @property
    def fitted_order(self):
        return {nm: self.order(nm) for nm in NORMS}

    def to_dict(self):
        return {"scheme": self.scheme, "resolutions": list(self.resolutions),
                "errors_l1": self.errors_l1, "errors_l2": self.errors_l2,
                "errors_linf": self.errors_linf, "fitted_order": self.fitted_order}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "l1", "l2", "linf"])
            for row in zip(self.resolutions, self.errors_l1, self.errors_l2, self.errors_linf):
                w.writerow([row[0]] + [fmt(v) for v in row[1:]])


def convergence_study(setup, schemes, resolutions, int_cfg, n_ref=REFERENCE_N, cache_dir=None,
                      use_cache=True):
    """Error norms of each scheme against the reference at every resolution.

    ``schemes`` maps a label to a SpatialOperatorConfig.  The locking problem is
    compared with its exact solution; other presets with the cached N = n_ref
    arithmetic reference.
    """
    from .timestepping import simulate

    resolutions = sorted(int(n) for n in resolutions)
    exact = setup.preset.name == "tlp"
    ref = None
    if not exact:
        for n in resolutions:
            if n_ref % n:
                raise ConfigurationError(f"N={n} does not divide the reference resolution {n_ref}")
        ref = reference_solution(setup, int_cfg, int_cfg.t_end, n_ref, cache_dir, use_cache)
    reports = {}
    for label, op_cfg in schemes.items():
        rep = ConvergenceReport(label, resolutions)
        for n in resolutions:
            su = setup.with_grid(n)
            f = simulate(su, op_cfg, int_cfg).field
            target = tlp_exact(su.grid.x, f.time) if exact else restrict(ref.values, n)
            e = (f.values - target)[1:-1]
            rep.errors_l1.append(norm_of(e, su.grid.dx, "l1"))
            rep.errors_l2.append(norm_of(e, su.grid.dx, "l2"))
            rep.errors_linf.append(norm_of(e, su.grid.dx, "linf"))
        reports[label] = rep
    return reports
