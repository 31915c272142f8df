"""Hot loops: spatial operator, fused explicit time loop, Picard/Thomas implicit step.

Every routine exists twice, as a numba-compiled scalar loop (``*_nb``) and as
vectorised numpy (``*_np``).  ``gpmelab._accel.backend()`` decides which one the
public API calls.  Both evaluate the same formulas in the same order, so the two
paths agree to round-off.

Integer codes:
    avg        0 arithmetic, 1 harmonic
    mhm_mode   0 off, 1 both terms, 2 term I only, 3 term II only
    scheme     0 forward Euler, 1 TVD RK2
"""

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import njit
from .coefficients import KIND_CONSTANT, KIND_PME, KIND_SUPERSLOW, ipow

AVG_ARITHMETIC = 0
AVG_HARMONIC = 1

MHM_OFF = 0
MHM_FULL = 1
MHM_TERM1 = 2
MHM_TERM2 = 3

SCHEME_FE = 0
SCHEME_RK2 = 1


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

@njit(inline="always")
def _kval(kind, param, mint, p):
    if kind == KIND_PME:
        if mint >= 0:
            out = 1.0
            for _ in range(mint):
                out *= p
            return out
        return p ** param
    if kind == KIND_SUPERSLOW:
        return math.exp(-1.0 / p)
    return param


@njit(inline="always")
def _ratios(kind, param, p):
    if kind == KIND_PME:
        inv = 1.0 / p
        r1 = param * inv
        r2 = param * (param - 1.0) * inv * inv
        r3 = param * (param - 1.0) * (param - 2.0) * inv * inv * inv
        return r1, r2, r3
    if kind == KIND_SUPERSLOW:
        q = 1.0 / p
        q2 = q * q
        q3 = q2 * q
        q4 = q2 * q2
        return q2, q4 - 2.0 * q3, q4 * q2 - 6.0 * q4 * q + 6.0 * q4
    return 0.0, 0.0, 0.0


@njit(inline="always")
def _face(avg, kl, kr):
    if avg == AVG_ARITHMETIC:
        return 0.5 * (kl + kr)
    s = kl + kr
    if s > 0.0:
        return 2.0 * kl * kr / s
    return 0.0


@njit(inline="always")
def _mhm_term(mode, local, k, r1, r2, r3, dm, d2, dx, dt):
    dx2 = dx * dx
    bh = 0.75 * dx2 * k * (r2 - r1 * r1)
    fh = dx2 * k * (r3 / 6.0 - 0.25 * (2.0 * r1 * r2 - r1 * r1 * r1))
    dm2 = dm * dm
    if local:
        a = -3.5 * dt * k * k * (r1 * r1 + r2)
        if k + (a + bh) * dm2 >= 0.0:
            return 0.0
    out = 0.0
    if mode == MHM_FULL or mode == MHM_TERM1:
        out -= bh * dm2 * d2
    if mode == MHM_FULL or mode == MHM_TERM2:
        out -= fh * dm2 * dm2
    return out


@njit
def operator_nb(p, out, kbuf, dx, dt, avg, mhm_mode, mhm_local, kind, param):
    """Fill ``out`` with the semi-discrete right-hand side; return first bad node or -1."""
    n = p.size
    mint = int(param) if (kind == KIND_PME and param == int(param)) else -1
    for i in range(n):
        kbuf[i] = _kval(kind, param, mint, p[i])
    inv_dx2 = 1.0 / (dx * dx)
    out[0] = 0.0
    out[n - 1] = 0.0
    k_left = _face(avg, kbuf[0], kbuf[1])
    bad = -1
    for i in range(1, n - 1):
        k_right = _face(avg, kbuf[i], kbuf[i + 1])
        dp_right = p[i + 1] - p[i]
        dp_left = p[i] - p[i - 1]
        v = (k_right * dp_right - k_left * dp_left) * inv_dx2
        if mhm_mode != MHM_OFF:
            r1, r2, r3 = _ratios(kind, param, p[i])
            dm = dp_left / dx
            d2 = (dp_right - dp_left) * inv_dx2
            v += _mhm_term(mhm_mode, mhm_local, kbuf[i], r1, r2, r3, dm, d2, dx, dt)
        if not math.isfinite(v) and bad < 0:
            bad = i
        out[i] = v
        k_left = k_right
    return bad


@njit
def predictor_nb(p, dx, dt, kind, param):
    """Minimum of k + (A + B^H) (D^- p)^2 over interior nodes and its violation count."""
    n = p.size
    mint = int(param) if (kind == KIND_PME and param == int(param)) else -1
    dx2 = dx * dx
    vmin = np.inf
    count = 0
    for i in range(1, n - 1):
        k = _kval(kind, param, mint, p[i])
        r1, r2, r3 = _ratios(kind, param, p[i])
        a = -3.5 * dt * k * k * (r1 * r1 + r2)
        bh = 0.75 * dx2 * k * (r2 - r1 * r1)
        dm = (p[i] - p[i - 1]) / dx
        eff = k + (a + bh) * dm * dm
        if eff < vmin:
            vmin = eff
        if eff < 0.0:
            count += 1
    return vmin, count


@njit
def advance_explicit_nb(p, nsteps, dt, dx, bcl, bcr, scheme, avg, mhm_mode, mhm_local,
                        kind, param, probe_idx, probe_out, pred_min, pred_cnt):
    """Advance ``p`` in place by ``nsteps`` explicit steps.

    ``bcl[s]``/``bcr[s]`` are the boundary values at the end of step s.  When
    ``probe_idx >= 0`` the probe value after each step goes to ``probe_out``;
    when ``pred_min`` is non-empty the oscillation predictor is recorded too.
    Returns (step, node) of the first non-finite value, or (-1, -1).
    """
    n = p.size
    kbuf = np.empty(n)
    lp = np.empty(n)
    u1 = np.empty(n)
    record_pred = pred_min.size > 0
    for s in range(nsteps):
        bad = operator_nb(p, lp, kbuf, dx, dt, avg, mhm_mode, mhm_local, kind, param)
        if bad >= 0:
            return s, bad
        if scheme == SCHEME_FE:
            for i in range(1, n - 1):
                p[i] = p[i] + dt * lp[i]
        else:
            u1[0] = bcl[s]
            u1[n - 1] = bcr[s]
            for i in range(1, n - 1):
                u1[i] = p[i] + dt * lp[i]
            bad = operator_nb(u1, lp, kbuf, dx, dt, avg, mhm_mode, mhm_local, kind, param)
            if bad >= 0:
                return s, bad
            for i in range(1, n - 1):
                p[i] = 0.5 * p[i] + 0.5 * u1[i] + 0.5 * dt * lp[i]
        p[0] = bcl[s]
        p[n - 1] = bcr[s]
        if probe_idx >= 0:
            probe_out[s] = p[probe_idx]
        if record_pred:
            vmin, cnt = predictor_nb(p, dx, dt, kind, param)
            pred_min[s] = vmin
            pred_cnt[s] = cnt
    for i in range(n):
        if not math.isfinite(p[i]):
            return nsteps - 1, i
    return -1, -1


@njit
def thomas_nb(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / den
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


@njit
def be_step_nb(pn, bl, br, dt, dx, avg, kind, param, max_iters, tol, hist):
    """One backward Euler step by Picard iteration with lagged face coefficients.

    Returns (q, iterations, last update); iterations is negative if ``tol`` was
    not reached.  ``hist[j]`` receives the max-norm nonlinear residual of the
    iterate entering Picard sweep j.
    """
    n = pn.size
    m = n - 2
    q = pn.copy()
    q[0] = bl
    q[n - 1] = br
    mint = int(param) if (kind == KIND_PME and param == int(param)) else -1
    kbuf = np.empty(n)
    kf = np.empty(n - 1)
    lower = np.empty(m)
    diag = np.empty(m)
    upper = np.empty(m)
    rhs = np.empty(m)
    r = dt / (dx * dx)
    upd = np.inf
    for it in range(max_iters):
        for i in range(n):
            kbuf[i] = _kval(kind, param, mint, q[i])
        for j in range(n - 1):
            kf[j] = _face(avg, kbuf[j], kbuf[j + 1])
        # the linear solve is done for the update, so a converged iterate
        # (zero residual) is reproduced exactly
        res = 0.0
        for a in range(m):
            i = a + 1
            ri = q[i] - pn[i] - r * (kf[i] * (q[i + 1] - q[i]) - kf[i - 1] * (q[i] - q[i - 1]))
            if abs(ri) > res:
                res = abs(ri)
            rhs[a] = -ri
            lower[a] = -r * kf[i - 1]
            upper[a] = -r * kf[i]
            diag[a] = 1.0 + r * (kf[i - 1] + kf[i])
        hist[it] = res
        dq = thomas_nb(lower, diag, upper, rhs)
        upd = 0.0
        for a in range(m):
            d = abs(dq[a])
            if not d <= upd:
                upd = d
            q[a + 1] += dq[a]
        if upd < tol:
            return q, it + 1, upd
    return q, -max_iters, upd


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def kvalues_np(model, p):
    kind, param = model.kernel_params()
    if kind == KIND_PME:
        if param == int(param):
            return ipow(p, int(param))
        return p ** param
    if kind == KIND_SUPERSLOW:
        return np.exp(-1.0 / p)
    return np.full_like(p, param)


def face_np(avg, kl, kr):
    if avg == AVG_ARITHMETIC:
        return 0.5 * (kl + kr)
    s = kl + kr
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0.0, 2.0 * kl * kr / np.where(s > 0.0, s, 1.0), 0.0)


def mhm_np(mode, local, k, r1, r2, r3, dm, d2, dx, dt):
    dx2 = dx * dx
    bh = 0.75 * dx2 * k * (r2 - r1 * r1)
    fh = dx2 * k * (r3 / 6.0 - 0.25 * (2.0 * r1 * r2 - r1 * r1 * r1))
    dm2 = dm * dm
    out = np.zeros_like(k)
    if mode in (MHM_FULL, MHM_TERM1):
        out = out - bh * dm2 * d2
    if mode in (MHM_FULL, MHM_TERM2):
        out = out - fh * dm2 * dm2
    if local:
        a = -3.5 * dt * k * k * (r1 * r1 + r2)
        out = np.where(k + (a + bh) * dm2 < 0.0, out, 0.0)
    return out


def operator_np(p, dx, dt, avg, mhm_mode, mhm_local, model):
    k = kvalues_np(model, p)
    kf = face_np(avg, k[:-1], k[1:])
    dp = np.diff(p)
    out = np.zeros_like(p)
    out[1:-1] = (kf[1:] * dp[1:] - kf[:-1] * dp[:-1]) * (1.0 / (dx * dx))
    if mhm_mode != MHM_OFF:
        pi = p[1:-1]
        r1, r2, r3 = _ratios_np(model, pi)
        dm = dp[:-1] / dx
        d2 = (dp[1:] - dp[:-1]) * (1.0 / (dx * dx))
        out[1:-1] = out[1:-1] + mhm_np(mhm_mode, mhm_local, k[1:-1], r1, r2, r3, dm, d2, dx, dt)
    return out


def _ratios_np(model, p):
    kind, param = model.kernel_params()
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == KIND_PME:
            inv = 1.0 / p
            return (param * inv,
                    param * (param - 1.0) * inv * inv,
                    param * (param - 1.0) * (param - 2.0) * inv * inv * inv)
        if kind == KIND_SUPERSLOW:
            q = 1.0 / p
            q2 = q * q
            q3 = q2 * q
            q4 = q2 * q2
            return q2, q4 - 2.0 * q3, q4 * q2 - 6.0 * q4 * q + 6.0 * q4
    z = np.zeros_like(p)
    return z, z, z


def predictor_np(p, dx, dt, model):
    pi = p[1:-1]
    k = kvalues_np(model, pi)
    r1, r2, _ = _ratios_np(model, pi)
    a = -3.5 * dt * k * k * (r1 * r1 + r2)
    bh = 0.75 * dx * dx * k * (r2 - r1 * r1)
    dm = (pi - p[:-2]) / dx
    return k + (a + bh) * dm * dm


def be_step_np(pn, bl, br, dt, dx, avg, model, max_iters, tol, hist):
    n = pn.size
    q = pn.copy()
    q[0] = bl
    q[-1] = br
    r = dt / (dx * dx)
    upd = np.inf
    ab = np.zeros((3, n - 2))
    for it in range(max_iters):
        k = kvalues_np(model, q)
        kf = face_np(avg, k[:-1], k[1:])
        dq = np.diff(q)
        res = q[1:-1] - pn[1:-1] - r * (kf[1:] * dq[1:] - kf[:-1] * dq[:-1])
        hist[it] = np.max(np.abs(res))
        ab[0, 1:] = -r * kf[1:-1]
        ab[1, :] = 1.0 + r * (kf[:-1] + kf[1:])
        ab[2, :-1] = -r * kf[1:-1]
        delta = solve_banded((1, 1), ab, -res)
        upd = np.max(np.abs(delta))
        q[1:-1] += delta
        if upd < tol:
            return q, it + 1, upd
    return q, -max_iters, upd
