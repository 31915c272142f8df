"""Nonlinear diffusion coefficients k(p) and their closed-form p-derivatives."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

# integer codes passed to the compiled kernels
KIND_PME = 0
KIND_SUPERSLOW = 1
KIND_CONSTANT = 2

_KINDS = ("pme", "superslow", "linear", "constant")


def ipow(p, n):
    """p**n for a non-negative integer n by repeated multiplication."""
    out = np.ones_like(p) if isinstance(p, np.ndarray) else 1.0
    for _ in range(n):
        out = out * p
    return out


def _power(p, e):
    if float(e).is_integer() and e >= 0:
        return ipow(p, int(e))
    with np.errstate(divide="ignore"):
        return np.power(p, e)


@dataclass(frozen=True)
class CoefficientModel:
    """k(p) for the porous medium family, superslow diffusion, or a constant.

    ``kind`` is one of ``"pme"`` (k = p**m, m >= 1), ``"linear"`` (k = p),
    ``"superslow"`` (k = exp(-1/p)) or ``"constant"`` (k = value).  The constant
    kind is non-degenerate and exists for verification against the linear heat
    equation.
    """

    kind: str = "pme"
    m: float = 1.0
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown coefficient model {self.kind!r}")
        if self.kind == "pme" and not self.m >= 1:
            raise ConfigurationError(f"PME exponent must satisfy m >= 1, got {self.m}")
        if self.kind == "linear" and self.m != 1.0:
            object.__setattr__(self, "m", 1.0)
        if self.kind == "constant" and not self.value > 0:
            raise ConfigurationError("constant coefficient must be positive")

    @classmethod
    def pme(cls, m):
        return cls("pme", float(m))

    @classmethod
    def linear(cls):
        return cls("linear", 1.0)

    @classmethod
    def superslow(cls):
        return cls("superslow")

    @classmethod
    def constant(cls, value=1.0):
        return cls("constant", value=float(value))

    @property
    def is_power_law(self):
        return self.kind in ("pme", "linear")

    @property
    def vanishes_at_zero(self):
        return self.kind != "constant"

    @property
    def label(self):
        if self.kind == "pme":
            return f"pme{self.m:g}"
        return self.kind

    def kernel_params(self):
        """(kind code, parameter) understood by ``gpmelab.kernels``."""
        if self.is_power_law:
            return KIND_PME, float(self.m)
        if self.kind == "superslow":
            return KIND_SUPERSLOW, 0.0
        return KIND_CONSTANT, float(self.value)

    def to_dict(self):
        if self.kind == "pme":
            return {"model": "pme", "m": self.m}
        if self.kind == "constant":
            return {"model": "constant", "value": self.value}
        return {"model": self.kind}

    @classmethod
    def from_dict(cls, spec):
        name = str(spec.get("model", "pme")).lower()
        if name == "pme":
            return cls.pme(spec.get("m", 1.0))
        if name == "constant":
            return cls.constant(spec.get("value", 1.0))
        if name in ("linear", "superslow"):
            return cls(name)
        raise ConfigurationError(f"unknown coefficient model {name!r}")

    def _check_domain(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "superslow":
            if np.any(~(p > 0)):
                raise DomainError("superslow coefficient requires p > 0")
        elif np.any(p < 0):
            raise DomainError("coefficient requires p >= 0")
        return p

    def evaluate(self, p, order=0):
        """Order-th p-derivative of k at p (order 0..3)."""
        if order not in (0, 1, 2, 3):
            raise ValueError(f"derivative order must be 0..3, got {order!r}")
        return self.derivatives(p)[order]

    def __call__(self, p):
        return self.evaluate(p, 0)

    def derivatives(self, p):
        """Return (k, k_p, k_pp, k_ppp) at p."""
        p = self._check_domain(p)
        if self.is_power_law:
            m = self.m
            out = []
            coef = 1.0
            for j in range(4):
                if coef == 0.0:
                    out.append(np.zeros_like(p))
                else:
                    out.append(coef * _power(p, m - j))
                coef *= m - j
            return tuple(out)
        if self.kind == "superslow":
            e = np.exp(-1.0 / p)
            r1, r2, r3 = _superslow_ratios(p)
            return e, e * r1, e * r2, e * r3
        k = np.full_like(p, self.value)
        zero = np.zeros_like(p)
        return k, zero, zero, zero

    def ratios(self, p):
        """Return (k_p/k, k_pp/k, k_ppp/k) without dividing by k.

        Superslow k underflows to zero well before p does; the ratios stay
        finite there, so every formula of the form k * f(k_p/k, ...) remains
        well defined.
        """
        p = self._check_domain(p)
        if self.is_power_law:
            m = self.m
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / p
            r1 = m * inv
            r2 = m * (m - 1.0) * inv * inv if m != 1.0 else np.zeros_like(p)
            if m in (1.0, 2.0):
                r3 = np.zeros_like(p)
            else:
                r3 = m * (m - 1.0) * (m - 2.0) * inv * inv * inv
            return r1, r2, r3
        if self.kind == "superslow":
            return _superslow_ratios(p)
        zero = np.zeros_like(p)
        return zero, zero, zero


def _superslow_ratios(p):
    q = 1.0 / p
    q2 = q * q
    q3 = q2 * q
    q4 = q2 * q2
    return q2, q4 - 2.0 * q3, q4 * q2 - 6.0 * q4 * q + 6.0 * q4


def evaluate(model, p, order=0):
    """Order-th p-derivative of the model coefficient at p."""
    return model.evaluate(p, order)


@dataclass
class DegeneracyReport:
    p_samples: np.ndarray
    C_values: np.ndarray  # NaN where k_p = 0 makes C undefined
    condition1_ok: bool
    condition2_ok: bool

    @property
    def undefined(self):
        return np.isnan(self.C_values)


def degeneracy_check(model, p_samples):
    """Evaluate C(p) = k k_pp / k_p**2 and the two degeneracy conditions.

    Condition 1 is that k vanishes as p -> 0; condition 2 that C(p) < 1 at every
    sample.  Samples where k_p = 0 give an undefined C and fail condition 2.
    """
    p = np.atleast_1d(np.asarray(p_samples, dtype=float))
    if np.any(~(p > 0)):
        raise DomainError("degeneracy samples must be strictly positive")
    r1, r2, _ = model.ratios(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(r1 != 0.0, r2 / (r1 * r1), np.nan)
    cond2 = bool(np.all(C < 1.0))
    return DegeneracyReport(p, C, model.vanishes_at_zero, cond2)
