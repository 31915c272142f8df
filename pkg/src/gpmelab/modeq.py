"""Leading modified-equation coefficients of the FTCS scheme and the anti-diffusion predictor.

The modified equation of the forward-Euler, central-flux scheme reads

    p_t - (k p_x)_x = p_x^2 p_xx (A + B) + p_xx^2 C + p_xxx p_x D
                      + p_x^4 (E + F) + p_xxxx G + O(dt^2 + dx^4)

Switching from arithmetic to harmonic face averages changes only B and F, by
deltaB_H = -(3 dx^2/4) k_p^2/k and deltaF_H = -(dx^2/4)(2 k_p k_pp/k - k_p^3/k^2).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .flux import AveragingRule
from .grid import fmt


@dataclass
class ModEqCoefficients:
    A: np.ndarray
    B: np.ndarray  # B^H when the rule is harmonic
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray  # F^H when the rule is harmonic
    G: np.ndarray
    B_arithmetic: np.ndarray
    F_arithmetic: np.ndarray
    deltaB_H: np.ndarray
    deltaF_H: np.ndarray
    averaging: AveragingRule

    @property
    def B_H(self):
        return self.B_arithmetic + self.deltaB_H

    @property
    def F_H(self):
        return self.F_arithmetic + self.deltaF_H


def coefficients(model, p, dt, dx, averaging=AveragingRule.ARITHMETIC):
    """Modified-equation coefficients at state p for step sizes (dt, dx)."""
    averaging = AveragingRule(averaging)
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0)):
        raise DomainError("modified-equation coefficients need p > 0")
    if dt < 0 or not dx > 0:
        raise DomainError("step sizes must be positive")
    k, kp, kpp, kppp = model.derivatives(p)
    # k_p^2/k and friends are formed from derivative ratios so that they stay
    # finite where k itself underflows (superslow diffusion at small p)
    r1, r2, _ = model.ratios(p)
    dx2 = dx * dx
    A = -3.5 * dt * (kp * kp + k * kpp)
    B = 0.75 * dx2 * kpp
    C = kp * (-2.0 * k * dt + dx2 / 4.0)
    D = kp * (-3.0 * k * dt + dx2 / 3.0)
    E = -0.5 * dt * (3.0 * kp * kpp + k * kppp)
    F = dx2 / 6.0 * kppp
    G = k * (-k * dt / 2.0 + dx2 / 12.0)
    dB = -0.75 * dx2 * k * r1 * r1
    dF = -0.25 * dx2 * k * (2.0 * r1 * r2 - r1 * r1 * r1)
    harmonic = averaging is AveragingRule.HARMONIC
    return ModEqCoefficients(
        A=A, B=B + dB if harmonic else B, C=C, D=D, E=E, F=F + dF if harmonic else F, G=G,
        B_arithmetic=B, F_arithmetic=F, deltaB_H=dB, deltaF_H=dF, averaging=averaging,
    )


@dataclass
class PredictorReport:
    effective_diffusion: np.ndarray  # one value per interior node
    min_effective_diffusion: float
    violating_nodes: list


def oscillation_predictor(field, model, dt, dx):
    """Evaluate k(p) + (A + B^H)(D^- p)^2 at every interior node.

    Temporal oscillations are expected where this leading coefficient of p_xx
    turns negative.
    """
    p = np.asarray(getattr(field, "values", field), dtype=float)
    c = coefficients(model, p[1:-1], dt, dx, AveragingRule.HARMONIC)
    dm = (p[1:-1] - p[:-2]) / dx
    eff = model.evaluate(p[1:-1]) + (c.A + c.B) * dm * dm
    nodes = (np.flatnonzero(eff < 0.0) + 1).tolist()
    return PredictorReport(eff, float(np.min(eff)), nodes)


def write_predictor_csv(path, times, min_eff, n_violating):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "min_effective_diffusion", "n_violating_nodes"])
        for t, v, n in zip(times, min_eff, n_violating):
            w.writerow([fmt(t), fmt(v), int(n)])
