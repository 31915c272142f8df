"""Uniform vertex-centred mesh, the discrete field, boundary data and presets."""

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coefficients import CoefficientModel
from .errors import ConfigurationError, NumericalFailure

REFERENCE_N = 3200


@dataclass(frozen=True)
class Grid1D:
    """N intervals on [x_left, x_right]; nodes 0..N, interior unknowns 1..N-1."""

    N: int
    x_left: float = 0.0
    x_right: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ConfigurationError(f"grid needs an integer N >= 4, got {self.N}")
        if not self.x_right > self.x_left:
            raise ConfigurationError("x_right must exceed x_left")

    @property
    def dx(self):
        return (self.x_right - self.x_left) / self.N

    @property
    def x(self):
        return self.x_left + np.arange(self.N + 1) * self.dx

    @property
    def faces(self):
        return self.x_left + (np.arange(self.N) + 0.5) * self.dx

    def nearest_node(self, x):
        i = int(round((x - self.x_left) / self.dx))
        return min(max(i, 0), self.N)

    def stride_into(self, fine):
        """Index stride mapping this grid's nodes onto a nested finer grid."""
        if (fine.x_left, fine.x_right) != (self.x_left, self.x_right) or fine.N % self.N:
            raise ValueError(f"grid N={self.N} is not nested in grid N={fine.N}")
        return fine.N // self.N


@dataclass
class Field:
    values: np.ndarray
    time: float = 0.0

    def copy(self):
        return Field(self.values.copy(), self.time)

    def check_finite(self, step=None):
        bad = np.flatnonzero(~np.isfinite(self.values))
        if bad.size:
            raise NumericalFailure(
                f"non-finite value at node {bad[0]} (t={self.time:.6g}, step={step})",
                step=step, node=int(bad[0]))


@dataclass(frozen=True)
class Dirichlet:
    """Boundary value g(t): a constant, or the locking-problem ramp (3t)**(1/3)."""

    kind: str = "constant"
    value: float = 0.0

    def __call__(self, t):
        if self.kind == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.value)[()]
        if self.kind == "tlp":
            return np.cbrt(3.0 * np.asarray(t, dtype=float))[()]
        raise ConfigurationError(f"unknown boundary kind {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class Preset:
    """Initial-condition preset.

    ``front``    p = max(p_right, p_left (1 - x/x_front)), a ramp of compact
                 support on top of the background p_right.
    ``linear``   the straight line between the two boundary values.
    ``tlp``      the locking problem: p = h0 everywhere, left boundary (3t)**(1/3).
    """

    name: str = "front"
    p_left: float = 2.0
    p_right: float = 0.1
    x_front: float = 0.1
    h0: float = 1e-3

    def to_dict(self):
        if self.name == "tlp":
            return {"name": "tlp", "h0": self.h0}
        d = {"name": self.name, "p_left": self.p_left, "p_right": self.p_right}
        if self.name == "front":
            d["x_front"] = self.x_front
        return d

    @classmethod
    def from_dict(cls, spec):
        return cls(**spec)


@dataclass(frozen=True)
class ProblemSetup:
    grid: Grid1D
    model: CoefficientModel
    preset: Preset = dc_field(default_factory=Preset)

    def __post_init__(self):
        pr = self.preset
        if pr.name not in ("front", "linear", "tlp"):
            raise ConfigurationError(f"unknown preset {pr.name!r}")
        if pr.name == "tlp":
            if not pr.h0 > 0:
                raise ConfigurationError("locking-problem background h0 must be positive")
        else:
            if not (pr.p_left > 0 and pr.p_right > 0):
                raise ConfigurationError("boundary values must be positive")
        if pr.name == "front":
            if not pr.p_left > pr.p_right:
                raise ConfigurationError("front preset needs p_left > p_right")
            if not 0 < pr.x_front <= self.grid.x_right - self.grid.x_left:
                raise ConfigurationError("x_front must lie inside the domain")

    @property
    def bc_left(self):
        if self.preset.name == "tlp":
            return Dirichlet("tlp")
        return Dirichlet("constant", self.preset.p_left)

    @property
    def bc_right(self):
        if self.preset.name == "tlp":
            return Dirichlet("constant", self.preset.h0)
        return Dirichlet("constant", self.preset.p_right)

    def with_grid(self, N):
        return ProblemSetup(Grid1D(N, self.grid.x_left, self.grid.x_right), self.model, self.preset)

    def to_dict(self):
        return {
            "N": self.grid.N,
            "x_left": self.grid.x_left,
            "x_right": self.grid.x_right,
            "model": self.model.to_dict(),
            "preset": self.preset.to_dict(),
        }


def front_setup(model, N, p_left=2.0, p_right=0.1, x_front=0.1):
    return ProblemSetup(Grid1D(N), model, Preset("front", p_left, p_right, x_front))


def linear_setup(model, N, p_left=2.0, p_right=0.1):
    return ProblemSetup(Grid1D(N), model, Preset("linear", p_left, p_right))


def tlp_setup(N, model=None, h0=1e-3):
    return ProblemSetup(Grid1D(N), model or CoefficientModel.pme(3), Preset("tlp", h0=h0))


def build_initial(setup):
    """Field at t = 0 for the setup's preset, boundary nodes set from g(., 0)."""
    x = setup.grid.x
    pr = setup.preset
    if pr.name == "front":
        s = (x - setup.grid.x_left) / pr.x_front
        p = np.maximum(pr.p_right, pr.p_left * (1.0 - s))
    elif pr.name == "linear":
        s = (x - setup.grid.x_left) / (setup.grid.x_right - setup.grid.x_left)
        p = pr.p_left + (pr.p_right - pr.p_left) * s
    else:
        p = np.full_like(x, pr.h0)
    return apply_bc(Field(p, 0.0), setup, 0.0)


def apply_bc(field, setup, t):
    """Overwrite the two boundary nodes with g(x_left, t), g(x_right, t)."""
    field.values[0] = setup.bc_left(t)
    field.values[-1] = setup.bc_right(t)
    field.time = t
    return field


def fmt(v):
    return f"{v:.17g}"


def write_snapshot_csv(path, grid, field):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "p"])
        for xi, pi in zip(grid.x, field.values):
            w.writerow([fmt(xi), fmt(pi)])


def read_snapshot_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
