"""Face averages, face velocity and flux, the conservative operator, and the MHM term."""

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _accel, kernels
from .errors import ConfigurationError, DomainError, NumericalFailure


class AveragingRule(enum.Enum):
    ARITHMETIC = "arithmetic"
    HARMONIC = "harmonic"

    @property
    def code(self):
        return kernels.AVG_ARITHMETIC if self is AveragingRule.ARITHMETIC else kernels.AVG_HARMONIC


class MHMMode(enum.Enum):
    FULL = "full"
    TERM_I = "term1"  # counteracts B^H p_x^2 p_xx only
    TERM_II = "term2"  # counteracts F^H p_x^4 only

    @property
    def code(self):
        return {MHMMode.FULL: kernels.MHM_FULL,
                MHMMode.TERM_I: kernels.MHM_TERM1,
                MHMMode.TERM_II: kernels.MHM_TERM2}[self]


@dataclass(frozen=True)
class SpatialOperatorConfig:
    """Averaging rule plus the optional modified-harmonic correction.

    With ``mhm_local`` the correction is only added where the anti-diffusion
    predictor k + (A + B^H)(D^- p)^2 is negative; this needs the step size.
    """

    averaging: AveragingRule = AveragingRule.HARMONIC
    mhm_enabled: bool = False
    mhm_mode: MHMMode = MHMMode.FULL
    mhm_local: bool = False

    def __post_init__(self):
        if isinstance(self.averaging, str):
            object.__setattr__(self, "averaging", AveragingRule(self.averaging))
        if isinstance(self.mhm_mode, str):
            object.__setattr__(self, "mhm_mode", MHMMode(self.mhm_mode))
        if self.mhm_enabled and self.averaging is not AveragingRule.HARMONIC:
            raise ConfigurationError("the MHM correction is defined on top of harmonic averaging")

    @classmethod
    def arithmetic(cls):
        return cls(AveragingRule.ARITHMETIC)

    @classmethod
    def harmonic(cls):
        return cls(AveragingRule.HARMONIC)

    @classmethod
    def mhm(cls, mode=MHMMode.FULL, local=False):
        return cls(AveragingRule.HARMONIC, True, MHMMode(mode), local)

    @property
    def label(self):
        if not self.mhm_enabled:
            return self.averaging.value
        name = "mhm" if self.mhm_mode is MHMMode.FULL else f"mhm-{self.mhm_mode.value}"
        return name + ("-local" if self.mhm_local else "")

    def codes(self):
        mode = self.mhm_mode.code if self.mhm_enabled else kernels.MHM_OFF
        return self.averaging.code, mode, bool(self.mhm_enabled and self.mhm_local)

    def to_dict(self):
        return {"averaging": self.averaging.value, "mhm": self.mhm_enabled,
                "mhm_mode": self.mhm_mode.value, "mhm_local": self.mhm_local}


def face_average(rule, k_left, k_right):
    """Arithmetic or harmonic mean of two non-negative coefficients.

    The harmonic mean is 0 when either side is 0 (its continuous limit).
    """
    rule = AveragingRule(rule)
    kl = np.asarray(k_left, dtype=float)
    kr = np.asarray(k_right, dtype=float)
    if np.any(kl < 0) or np.any(kr < 0):
        raise DomainError("face averages need non-negative coefficients")
    return kernels.face_np(rule.code, kl, kr)[()]


def face_velocity(p_left, p_right, dx):
    """u = -(p_right - p_left)/dx; the sign is not the Darcy convention."""
    if not dx > 0:
        raise DomainError("dx must be positive")
    return -(np.asarray(p_right, dtype=float) - np.asarray(p_left, dtype=float)) / dx


def face_flux(rule, model, p, dx):
    """F_{i+1/2} = k_{i+1/2} u_{i+1/2} at the N faces of a nodal array."""
    p = np.asarray(p, dtype=float)
    k = kernels.kvalues_np(model, p)
    return face_average(rule, k[:-1], k[1:]) * face_velocity(p[:-1], p[1:], dx)


def spatial_operator(field, setup, cfg, dt=None):
    """(F_{i-1/2} - F_{i+1/2})/dx at interior nodes (+ MHM term); zeros at the boundary.

    ``dt`` is only needed for the locally switched correction.
    """
    p = np.ascontiguousarray(getattr(field, "values", field), dtype=float)
    grid = setup.grid
    if p.shape != (grid.N + 1,):
        raise ValueError(f"field has shape {p.shape}, grid expects {(grid.N + 1,)}")
    avg, mode, local = cfg.codes()
    if local and dt is None:
        raise ConfigurationError("the local MHM switch needs the time step")
    dt = 0.0 if dt is None else float(dt)
    if setup.model.kind == "superslow" and np.any(~(p[1:-1] > 0)):
        raise DomainError("superslow coefficient requires positive interior values")
    if _accel.backend() == "numba":
        kind, param = setup.model.kernel_params()
        out = np.empty_like(p)
        bad = kernels.operator_nb(p, out, np.empty_like(p), grid.dx, dt, avg, mode, local,
                                  kind, param)
    else:
        out = kernels.operator_np(p, grid.dx, dt, avg, mode, local, setup.model)
        nonfinite = np.flatnonzero(~np.isfinite(out))
        bad = nonfinite[0] if nonfinite.size else -1
    if bad >= 0:
        raise NumericalFailure(f"non-finite flux difference at node {bad}", node=int(bad))
    return out


def mhm_correction(p_prev, p_i, p_next, dx, model, mode=MHMMode.FULL):
    """Modified-harmonic counter-term at one node.

    Term I  = -B^H(p_i) [D^- p]^2 [D^+ D^- p]
    Term II = -F^H(p_i) [D^- p]^4
    with the left-biased difference D^- p = (p_i - p_prev)/dx.
    """
    from .modeq import coefficients

    mode = MHMMode(mode)
    c = coefficients(model, p_i, 0.0, dx, AveragingRule.HARMONIC)
    dm = (p_i - p_prev) / dx
    d2 = (p_next - 2.0 * p_i + p_prev) / (dx * dx)
    term1 = -c.B * dm ** 2 * d2
    term2 = -c.F * dm ** 4
    if mode is MHMMode.TERM_I:
        return term1
    if mode is MHMMode.TERM_II:
        return term2
    return term1 + term2


@dataclass(frozen=True)
class SmoothProfile:
    """A smooth coefficient profile k(x) with its first two x-derivatives."""

    k: Callable
    k_x: Callable
    k_xx: Callable


EXP_PROFILE = SmoothProfile(np.exp, np.exp, np.exp)
SINE_PROFILE = SmoothProfile(lambda x: 2.0 + np.sin(x), np.cos, lambda x: -np.sin(x))


@dataclass
class TruncationCheck:
    measured: float
    predicted: float

    @property
    def remainder(self):
        return self.measured - self.predicted


def truncation_leading(rule, k_profile, x_face, dx):
    """Measured face-average error against its leading-order prediction.

    measured  = average(k(x - dx/2), k(x + dx/2)) - k(x)
    predicted = dx^2/8 k_xx                   (arithmetic)
                dx^2/8 k_xx - dx^2/4 k_x^2/k  (harmonic)
    """
    rule = AveragingRule(rule)
    kf = float(k_profile.k(x_face))
    measured = float(face_average(rule, k_profile.k(x_face - dx / 2), k_profile.k(x_face + dx / 2))) - kf
    predicted = dx * dx / 8.0 * float(k_profile.k_xx(x_face))
    if rule is AveragingRule.HARMONIC:
        predicted -= dx * dx / 4.0 * float(k_profile.k_x(x_face)) ** 2 / kf
    return TruncationCheck(measured, predicted)
