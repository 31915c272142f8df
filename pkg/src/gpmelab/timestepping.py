"""Forward Euler, backward Euler (Picard) and TVD RK2 over the conservative operator."""

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _accel, kernels
from .errors import ConfigurationError, NumericalFailure
from .flux import SpatialOperatorConfig, spatial_operator
from .grid import Field, apply_bc, build_initial

CHUNK_STEPS = 65536


class TimeScheme(enum.Enum):
    FORWARD_EULER = "fe"
    BACKWARD_EULER = "be"
    TVD_RK2 = "rk2"

    @property
    def explicit(self):
        return self is not TimeScheme.BACKWARD_EULER


@dataclass(frozen=True)
class DtRule:
    """dt = dx**2/factor (``power="dx2"``) or dt = factor*dx (``power="dx"``)."""

    factor: float
    power: str = "dx2"

    def __post_init__(self):
        if not self.factor > 0:
            raise ConfigurationError("dt factor must be positive")
        if self.power not in ("dx2", "dx"):
            raise ConfigurationError(f"dt power must be 'dx2' or 'dx', got {self.power!r}")

    def dt(self, dx):
        return dx * dx / self.factor if self.power == "dx2" else self.factor * dx


def default_dt_factor(model):
    """dx^2 divisor matching the published runs: m=1 -> 4, m=2 -> 8, m=3 -> 16, superslow -> 2."""
    if model.is_power_law:
        return float(2.0 ** (model.m + 1.0))
    if model.kind == "superslow":
        return 2.0
    return 4.0 * model.value


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: TimeScheme = TimeScheme.FORWARD_EULER
    dt_rule: DtRule = DtRule(16.0)
    t_end: float = 0.08
    max_iters: int = 200
    tol: float = 1e-10

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", TimeScheme(self.scheme))
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        if self.max_iters < 1 or not self.tol > 0:
            raise ConfigurationError("nonlinear solver needs max_iters >= 1 and tol > 0")

    def to_dict(self):
        return {"scheme": self.scheme.value, "dt_factor": self.dt_rule.factor,
                "dt_power": self.dt_rule.power, "t_end": self.t_end,
                "max_iters": self.max_iters, "tol": self.tol}


def validate(op_cfg, int_cfg):
    if op_cfg.mhm_enabled and int_cfg.scheme is TimeScheme.BACKWARD_EULER:
        raise ConfigurationError("the MHM correction is derived for explicit time stepping only")


@dataclass
class StabilityReport:
    ratio: float
    ok: bool


def stability_guard(field, model, dt, dx):
    """Linear diffusion-number heuristic 2 max k dt/dx^2 <= 1."""
    p = np.asarray(getattr(field, "values", field), dtype=float)
    ratio = float(2.0 * np.max(kernels.kvalues_np(model, p)) * dt / (dx * dx))
    return StabilityReport(ratio, ratio <= 1.0 + 1e-12)


def step_forward_euler(field, setup, cfg, dt):
    lp = spatial_operator(field, setup, cfg, dt)
    out = Field(field.values + dt * lp, field.time + dt)
    apply_bc(out, setup, field.time + dt)
    out.check_finite()
    return out


def step_tvd_rk2(field, setup, cfg, dt):
    t1 = field.time + dt
    u1 = Field(field.values + dt * spatial_operator(field, setup, cfg, dt), t1)
    apply_bc(u1, setup, t1)
    lu1 = spatial_operator(u1, setup, cfg, dt)
    out = Field(0.5 * field.values + 0.5 * u1.values + 0.5 * dt * lu1, t1)
    apply_bc(out, setup, t1)
    out.check_finite()
    return out


def step_backward_euler(field, setup, cfg, dt, max_iters=200, tol=1e-10, history=None):
    """Solve p = p^n + dt L(p) by Picard iteration with lagged face coefficients.

    Each sweep freezes the face averages at the current iterate and solves the
    resulting tridiagonal system; iteration stops once the max-norm update is
    below ``tol``.  If ``history`` is a list, the nonlinear residual of every
    iterate is appended to it.
    """
    if cfg.mhm_enabled:
        raise ConfigurationError("the MHM correction is derived for explicit time stepping only")
    q, iters, _, hist = _be_step(field.values, setup, cfg, dt, field.time + dt, max_iters, tol)
    if history is not None:
        history.extend(hist.tolist())
    if iters < 0:
        raise NumericalFailure(
            f"Picard iteration did not converge in {max_iters} sweeps "
            f"(residual {hist[-1]:.3e})", residual=float(hist[-1]))
    out = Field(q, field.time + dt)
    out.check_finite()
    return out


def _be_step(p, setup, cfg, dt, t_new, max_iters, tol):
    hist = np.zeros(max_iters)
    bl = float(setup.bc_left(t_new))
    br = float(setup.bc_right(t_new))
    avg = cfg.averaging.code
    if _accel.backend() == "numba":
        kind, param = setup.model.kernel_params()
        q, iters, upd = kernels.be_step_nb(np.ascontiguousarray(p, dtype=float), bl, br, dt,
                                           setup.grid.dx, avg, kind, param, max_iters, tol, hist)
    else:
        q, iters, upd = kernels.be_step_np(np.asarray(p, dtype=float), bl, br, dt,
                                           setup.grid.dx, avg, setup.model, max_iters, tol, hist)
    used = abs(iters)
    return q, iters, upd, hist[:used]


@dataclass
class SimulationResult:
    field: Field
    dt: float
    n_steps: int
    snapshots: dict = dc_field(default_factory=dict)
    probe_x: float = None
    probe_t: np.ndarray = None
    probe_p: np.ndarray = None
    predictor_t: np.ndarray = None
    predictor_min: np.ndarray = None
    predictor_count: np.ndarray = None
    picard_iterations: np.ndarray = None
    stability: StabilityReport = None

    @property
    def probe(self):
        from .diagnostics import ProbeSeries

        if self.probe_t is None:
            return None
        return ProbeSeries(self.probe_x, self.probe_t, self.probe_p)


class _Recorder:
    def __init__(self, probe_idx, record_predictor, record_every):
        self.probe_idx = probe_idx
        self.record_predictor = record_predictor
        self.every = max(1, int(record_every))
        self.t, self.p, self.pt, self.pmin, self.pcnt = [], [], [], [], []

    def keep(self, first_step, n):
        """Mask of steps (global index first_step..first_step+n-1) to keep."""
        idx = first_step + 1 + np.arange(n)
        return idx % self.every == 0

    def add(self, times, probe, pmin, pcnt, mask):
        if self.probe_idx >= 0:
            self.t.append(times[mask])
            self.p.append(probe[mask])
        if self.record_predictor:
            self.pt.append(times[mask])
            self.pmin.append(pmin[mask])
            self.pcnt.append(pcnt[mask])


def _segment_times(t0, t1, dt):
    n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    times = t0 + dt * np.arange(1, n + 1)
    times[-1] = t1
    return times


def simulate(setup, op_cfg, int_cfg, probe_x=None, snapshot_times=(), record_predictor=False,
             record_every=1, initial=None, check_stability=True):
    """Integrate the setup from t = 0 to ``int_cfg.t_end``.

    Steps have the fixed size given by the dt rule; the step before every
    snapshot time and before t_end is shortened so those times are hit exactly.
    The probe value at the grid node nearest ``probe_x`` (and, if requested,
    the oscillation predictor) is recorded after every ``record_every`` steps.
    """
    validate(op_cfg, int_cfg)
    grid = setup.grid
    dx = grid.dx
    dt = int_cfg.dt_rule.dt(dx)
    field = (initial or build_initial(setup)).copy()
    scheme = int_cfg.scheme

    stability = stability_guard(
        np.append(field.values, [setup.bc_left(int_cfg.t_end), setup.bc_right(int_cfg.t_end)]),
        setup.model, dt, dx)
    if check_stability and scheme.explicit and not stability.ok:
        raise ConfigurationError(
            f"explicit step is outside the linear stability bound (2 k dt/dx^2 = {stability.ratio:.3f} > 1); "
            "increase the dt factor or disable the check")

    probe_idx = grid.nearest_node(probe_x) if probe_x is not None else -1
    rec = _Recorder(probe_idx, record_predictor, record_every)
    if probe_idx >= 0:
        rec.t.append(np.array([field.time]))
        rec.p.append(np.array([field.values[probe_idx]]))

    stops = sorted({float(t) for t in snapshot_times if 0.0 < t < int_cfg.t_end}) + [int_cfg.t_end]
    snapshots = {}
    if any(t == 0.0 for t in snapshot_times):
        snapshots[0.0] = field.copy()

    picard = []
    n_done = 0
    t = 0.0
    for t_stop in stops:
        times = _segment_times(t, t_stop, dt)
        steps = np.diff(np.concatenate(([t], times)))
        if scheme.explicit:
            n_done = _run_explicit(field, setup, op_cfg, scheme, times, steps, dt, n_done, rec)
        else:
            n_done = _run_implicit(field, setup, op_cfg, int_cfg, times, steps, n_done, rec, picard)
        t = t_stop
        field.time = t
        if t_stop in snapshot_times or t_stop != int_cfg.t_end:
            snapshots[t_stop] = field.copy()

    res = SimulationResult(field=field, dt=dt, n_steps=n_done, snapshots=snapshots,
                           stability=stability)
    if probe_idx >= 0:
        res.probe_x = float(grid.x[probe_idx])
        res.probe_t = np.concatenate(rec.t)
        res.probe_p = np.concatenate(rec.p)
    if record_predictor:
        res.predictor_t = np.concatenate(rec.pt) if rec.pt else np.empty(0)
        res.predictor_min = np.concatenate(rec.pmin) if rec.pmin else np.empty(0)
        res.predictor_count = np.concatenate(rec.pcnt) if rec.pcnt else np.empty(0, dtype=np.int64)
    if picard:
        res.picard_iterations = np.array(picard)
    return res


def _run_explicit(field, setup, op_cfg, scheme, times, steps, dt, n_done, rec):
    """Advance through ``times``: full steps of size dt, then the shortened last one."""
    n = times.size
    if abs(steps[-1] - dt) <= 1e-12 * dt:
        runs = [(0, n, dt)]
    else:
        runs = [(0, n - 1, dt), (n - 1, n, float(steps[-1]))]
    for lo, hi, h in runs:
        for c0 in range(lo, hi, CHUNK_STEPS):
            c1 = min(hi, c0 + CHUNK_STEPS)
            n_done = _explicit_chunk(field, setup, op_cfg, scheme, times[c0:c1], h, n_done, rec)
    field.time = float(times[-1])
    return n_done


def _explicit_chunk(field, setup, op_cfg, scheme, times, h, n_done, rec):
    nsteps = times.size
    bcl = np.asarray(setup.bc_left(times), dtype=float) * np.ones(nsteps)
    bcr = np.asarray(setup.bc_right(times), dtype=float) * np.ones(nsteps)
    probe = np.empty(nsteps if rec.probe_idx >= 0 else 0)
    pmin = np.empty(nsteps if rec.record_predictor else 0)
    pcnt = np.zeros(nsteps if rec.record_predictor else 0, dtype=np.int64)
    avg, mode, local = op_cfg.codes()
    dx = setup.grid.dx
    p = field.values
    if _accel.backend() == "numba":
        kind, param = setup.model.kernel_params()
        code = kernels.SCHEME_FE if scheme is TimeScheme.FORWARD_EULER else kernels.SCHEME_RK2
        bad_step, bad_node = kernels.advance_explicit_nb(
            p, nsteps, h, dx, bcl, bcr, code, avg, mode, local, kind, param,
            rec.probe_idx, probe, pmin, pcnt)
    else:
        bad_step, bad_node = _advance_explicit_np(
            p, nsteps, h, dx, bcl, bcr, scheme, avg, mode, local, setup.model,
            rec.probe_idx, probe, pmin, pcnt)
    if bad_step >= 0:
        step = n_done + int(bad_step) + 1
        raise NumericalFailure(
            f"non-finite value at node {bad_node} in step {step} (t={times[bad_step]:.6g})",
            step=step, node=int(bad_node))
    rec.add(times, probe, pmin, pcnt, rec.keep(n_done, nsteps))
    return n_done + nsteps


def _advance_explicit_np(p, nsteps, dt, dx, bcl, bcr, scheme, avg, mode, local, model,
                         probe_idx, probe_out, pred_min, pred_cnt):
    for s in range(nsteps):
        lp = kernels.operator_np(p, dx, dt, avg, mode, local, model)
        if scheme is TimeScheme.FORWARD_EULER:
            new = p + dt * lp
        else:
            u1 = p + dt * lp
            u1[0], u1[-1] = bcl[s], bcr[s]
            lu1 = kernels.operator_np(u1, dx, dt, avg, mode, local, model)
            new = 0.5 * p + 0.5 * u1 + 0.5 * dt * lu1
        new[0], new[-1] = bcl[s], bcr[s]
        bad = np.flatnonzero(~np.isfinite(new))
        if bad.size:
            return s, int(bad[0])
        p[:] = new
        if probe_idx >= 0:
            probe_out[s] = p[probe_idx]
        if pred_min.size:
            eff = kernels.predictor_np(p, dx, dt, model)
            pred_min[s] = eff.min()
            pred_cnt[s] = np.count_nonzero(eff < 0.0)
    return -1, -1


def _run_implicit(field, setup, op_cfg, int_cfg, times, steps, n_done, rec, picard):
    dx = setup.grid.dx
    every = rec.every
    for t_new, h in zip(times, steps):
        q, iters, _, hist = _be_step(field.values, setup, op_cfg, float(h), float(t_new),
                                     int_cfg.max_iters, int_cfg.tol)
        n_done += 1
        if iters < 0:
            raise NumericalFailure(
                f"Picard iteration did not converge in step {n_done} (t={t_new:.6g}, "
                f"residual {hist[-1]:.3e})", step=n_done, residual=float(hist[-1]))
        bad = np.flatnonzero(~np.isfinite(q))
        if bad.size:
            raise NumericalFailure(f"non-finite value at node {bad[0]} in step {n_done}",
                                   step=n_done, node=int(bad[0]))
        field.values[:] = q
        field.time = float(t_new)
        picard.append(iters)
        if n_done % every == 0:
            one = np.array([t_new])
            probe = np.array([q[rec.probe_idx]]) if rec.probe_idx >= 0 else np.empty(0)
            if rec.record_predictor:
                eff = kernels.predictor_np(q, dx, float(h), setup.model)
                pmin, pcnt = np.array([eff.min()]), np.array([np.count_nonzero(eff < 0.0)])
            else:
                pmin = pcnt = np.empty(0)
            rec.add(one, probe, pmin, pcnt, np.array([True]))
    return n_done
