"""Command-line entry point: single runs, convergence sweeps and scheme overlays.

Every option may also be given in a JSON config file (``--config``); flags
given on the command line override the file.  Output goes to
``<outdir>/<run-id>/`` and is a pure function of the resolved config.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coefficients import CoefficientModel
from .diagnostics import (ProbeSeries, convergence_study, default_front_threshold,
                          detect_oscillations, track_front)
from .errors import ConfigurationError, DomainError, NumericalFailure
from .flux import SpatialOperatorConfig
from .grid import REFERENCE_N, Grid1D, Preset, ProblemSetup, fmt, write_snapshot_csv
from .modeq import write_predictor_csv
from .timestepping import DtRule, IntegratorConfig, default_dt_factor, simulate

log = logging.getLogger("gpmelab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
OPERATORS = ("arithmetic", "harmonic", "mhm", "mhm-term1", "mhm-term2", "mhm-local")


@dataclass
class RunConfig:
    model: str = "pme"
    m: float = 3.0
    preset: str = "front"
    n: int = 50
    avg: str = "harmonic"
    mhm: bool = False
    mhm_mode: str = "full"
    mhm_local: bool = False
    scheme: str = "fe"
    dt_factor: float = None  # None: the model's default dx^2 divisor
    dt_power: str = "dx2"
    t_end: float = 0.5
    snapshots: list = dataclasses.field(default_factory=list)
    probe: float = 0.12
    record_every: int = 1
    noise_floor: float = 1e-10
    outdir: str = "runs"
    run_id: str = None

    def coefficient_model(self):
        return CoefficientModel.from_dict({"model": self.model, "m": self.m})

    def setup(self, n=None):
        if self.preset == "tlp":
            preset = Preset("tlp")
        elif self.preset in ("front", "linear"):
            preset = Preset(self.preset)
        else:
            raise ConfigurationError(f"unknown preset {self.preset!r}")
        return ProblemSetup(Grid1D(int(n or self.n)), self.coefficient_model(), preset)

    def operator(self):
        if self.mhm:
            return SpatialOperatorConfig("harmonic" if self.avg == "harmonic" else self.avg,
                                         True, self.mhm_mode, self.mhm_local)
        return SpatialOperatorConfig(self.avg)

    def integrator(self):
        factor = self.dt_factor
        if factor is None:
            factor = default_dt_factor(self.coefficient_model()) if self.dt_power == "dx2" else 1.0
        return IntegratorConfig(self.scheme, DtRule(float(factor), self.dt_power), float(self.t_end))

    def resolved(self):
        """Everything that determines the numbers, without output locations."""
        integ = self.integrator()
        return {
            "setup": self.setup().to_dict(),
            "operator": self.operator().to_dict(),
            "integrator": integ.to_dict(),
            "snapshots": sorted(float(t) for t in self.snapshots),
            "probe": float(self.probe),
            "record_every": int(self.record_every),
            "noise_floor": float(self.noise_floor),
        }

    def content_hash(self, **extra):
        """sha256 of the resolved config, plus any command-level arguments."""
        blob = json.dumps(dict(self.resolved(), **extra), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def default_run_id(self):
        m = f"{self.m:g}" if self.model == "pme" else ""
        return (f"{self.preset}-{self.model}{m}-N{self.n}-{self.operator().label}"
                f"-{self.scheme}-{self.content_hash()[:8]}")

    def validate(self):
        self.operator()
        integ = self.integrator()
        if self.mhm and integ.scheme.value == "be":
            raise ConfigurationError("the MHM correction is only defined for the explicit schemes")
        if not 0 <= self.probe <= 1:
            raise ConfigurationError("probe position must lie in [0, 1]")
        for t in self.snapshots:
            if not 0 <= t <= self.t_end:
                raise ConfigurationError(f"snapshot time {t} is outside [0, t_end]")
        return self


def operator_from_label(label):
    if label not in OPERATORS:
        raise ConfigurationError(f"unknown scheme {label!r}; choose from {', '.join(OPERATORS)}")
    if label in ("arithmetic", "harmonic"):
        return SpatialOperatorConfig(label)
    if label == "mhm-local":
        return SpatialOperatorConfig.mhm(local=True)
    return SpatialOperatorConfig.mhm(label.partition("-")[2] or "full")


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--model", choices=["pme", "linear", "superslow"])
    p.add_argument("--m", type=float, help="PME exponent")
    p.add_argument("--preset", choices=["front", "linear", "tlp"])
    p.add_argument("--n", type=int, help="number of grid intervals")
    p.add_argument("--avg", choices=["arithmetic", "harmonic"])
    p.add_argument("--mhm", action="store_true", default=None, help="add the MHM correction")
    p.add_argument("--mhm-mode", choices=["full", "term1", "term2"])
    p.add_argument("--mhm-local", action="store_true", default=None,
                   help="apply the correction only where the predictor is negative")
    p.add_argument("--scheme", choices=["fe", "be", "rk2"])
    p.add_argument("--dt-factor", type=float,
                   help="dt = dx^2/factor (dx2) or factor*dx (dx); default from the model")
    p.add_argument("--dt-power", choices=["dx2", "dx"])
    p.add_argument("--t-end", type=float)
    p.add_argument("--snapshot", type=float, action="append", dest="snapshots",
                   help="snapshot time (repeatable)")
    p.add_argument("--probe", type=float, help="probe position (nearest node is used)")
    p.add_argument("--record-every", type=int)
    p.add_argument("--noise-floor", type=float)
    p.add_argument("--outdir")
    p.add_argument("--run-id")


def build_parser():
    parser = argparse.ArgumentParser(prog="gpmelab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one simulation with snapshots, probe and diagnostics")
    _add_common(run)

    conv = sub.add_parser("convergence", help="error norms and fitted orders over a grid sweep")
    _add_common(conv)
    conv.add_argument("--ns", type=int, nargs="+", default=[100, 200, 400, 800])
    conv.add_argument("--schemes", nargs="+", default=["arithmetic", "harmonic", "mhm"],
                      choices=OPERATORS)
    conv.add_argument("--n-ref", type=int, default=REFERENCE_N)
    conv.add_argument("--no-cache", action="store_true", help="recompute the reference")

    cmp_ = sub.add_parser("compare", help="overlay several schemes on one grid")
    _add_common(cmp_)
    cmp_.add_argument("--schemes", nargs="+", choices=OPERATORS,
                      help="spatial operators to overlay")
    cmp_.add_argument("--integrators", nargs="+", choices=["fe", "be", "rk2"],
                      help="time integrators to overlay")
    return parser


def resolve_config(args):
    values = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    if cfg.model in ("linear", "superslow") and "m" not in values:
        cfg.m = 1.0
    return cfg.validate()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _snapshot_name(t):
    return f"snapshot_t{t:g}.csv"


def execute(cfg):
    """Run one configuration and return (setup, result, oscillation report, fronts)."""
    setup = cfg.setup()
    integ = cfg.integrator()
    result = simulate(setup, cfg.operator(), integ, probe_x=cfg.probe,
                      snapshot_times=tuple(cfg.snapshots) + (integ.t_end,),
                      record_predictor=True, record_every=cfg.record_every)
    osc = detect_oscillations(result.probe, cfg.noise_floor) if result.probe.t.size >= 3 else None
    fronts = {f"{t:g}": track_front(f, default_front_threshold(setup, t), setup.grid)
              for t, f in sorted(result.snapshots.items())}
    return setup, result, osc, fronts


def cmd_run(cfg):
    setup, result, osc, fronts = execute(cfg)
    out = Path(cfg.outdir) / (cfg.run_id or cfg.default_run_id())
    out.mkdir(parents=True, exist_ok=True)
    for t, f in sorted(result.snapshots.items()):
        write_snapshot_csv(out / _snapshot_name(t), setup.grid, f)
    result.probe.to_csv(out / "probe.csv")
    _write_json(out / "oscillations.json", osc.to_dict() if osc else {})
    write_predictor_csv(out / "predictor.csv", result.predictor_t, result.predictor_min,
                        result.predictor_count)
    meta = {
        "config": cfg.resolved(),
        "content_hash": cfg.content_hash(),
        "dt": result.dt,
        "n_steps": result.n_steps,
        "probe_node_x": result.probe_x,
        "stability_ratio": result.stability.ratio,
        "front_positions": fronts,
    }
    _write_json(out / "meta.json", meta)
    print(f"{out}: {result.n_steps} steps, front(t_end) = {fronts[f'{cfg.t_end:g}']:.6f}, "
          f"extrema = {(osc.n_maxima + osc.n_minima) if osc else 0}")
    return out


def cmd_convergence(cfg, ns, schemes, n_ref=REFERENCE_N, use_cache=True):
    schemes_cfg = {label: operator_from_label(label) for label in schemes}
    reports = convergence_study(cfg.setup(min(ns)), schemes_cfg, ns, cfg.integrator(),
                                n_ref=n_ref, use_cache=use_cache)
    key = cfg.content_hash(ns=sorted(ns), schemes=list(schemes), n_ref=n_ref)
    run_id = cfg.run_id or f"convergence-{cfg.preset}-{cfg.model}{cfg.m:g}-{key[:8]}"
    out = Path(cfg.outdir) / run_id
    out.mkdir(parents=True, exist_ok=True)
    for label, rep in reports.items():
        rep.to_csv(out / f"convergence_{label}.csv")
        orders = " ".join(f"{k}={v:.4f}" if v is not None else f"{k}=n/a"
                          for k, v in rep.fitted_order.items())
        print(f"{label:>12}: {orders}")
    _write_json(out / "convergence.json", {k: r.to_dict() for k, r in reports.items()})
    _write_json(out / "meta.json", {"config": cfg.resolved(), "resolutions": sorted(ns),
                                     "schemes": list(schemes), "n_ref": n_ref,
                                     "content_hash": key})
    return out, reports


def cmd_compare(configs, outdir, run_id):
    """Overlay several runs: one column per configuration."""
    if not configs:
        raise ConfigurationError("nothing to compare")
    n0, t0 = configs[0][1].n, configs[0][1].t_end
    for _, c in configs:
        if c.n != n0 or c.t_end != t0 or c.preset != configs[0][1].preset:
            raise ConfigurationError("compared runs must share grid, preset and t_end")
    runs = [(label, execute(c)) for label, c in configs]
    out = Path(outdir) / run_id
    out.mkdir(parents=True, exist_ok=True)
    labels = [lab for lab, _ in runs]
    grid = runs[0][1][0].grid
    for t in sorted(runs[0][1][1].snapshots):
        with open(out / _snapshot_name(t), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + labels)
            cols = [r[1].snapshots[t].values for _, r in runs]
            for i, x in enumerate(grid.x):
                w.writerow([fmt(x)] + [fmt(c[i]) for c in cols])
    # probe series onto the coarsest time grid of the set
    probes = [r[1].probe for _, r in runs]
    base = min(probes, key=lambda s: s.t.size).t
    with open(out / "probe.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + labels)
        cols = [np.interp(base, s.t, s.p) for s in probes]
        for j, t in enumerate(base):
            w.writerow([fmt(t)] + [fmt(c[j]) for c in cols])
    _write_json(out / "oscillations.json",
                {lab: (r[2].to_dict() if r[2] else {}) for lab, r in runs})
    _write_json(out / "meta.json", {lab: {"config": c.resolved(), "content_hash": c.content_hash(),
                                          "front_positions": r[3]}
                                    for (lab, r), (_, c) in zip(runs, configs)})
    print(f"{out}: compared {', '.join(labels)}")
    return out


def _compare_configs(base, schemes, integrators):
    schemes = schemes or [None]
    integrators = integrators or [None]
    configs = []
    for s in schemes:
        for integ in integrators:
            c = dataclasses.replace(base)
            if s is not None:
                op = operator_from_label(s)
                c.avg, c.mhm = op.averaging.value, op.mhm_enabled
                c.mhm_mode, c.mhm_local = op.mhm_mode.value, op.mhm_local
            if integ is not None:
                c.scheme = integ
            parts = [p for p in (s, integ) if p is not None]
            configs.append(("-".join(parts) or c.operator().label, c.validate()))
    return configs


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "run":
            cmd_run(cfg)
        elif args.command == "convergence":
            cmd_convergence(cfg, args.ns, args.schemes, args.n_ref, not args.no_cache)
        else:
            configs = _compare_configs(cfg, args.schemes, args.integrators)
            key = cfg.content_hash(schemes=args.schemes, integrators=args.integrators)
            run_id = cfg.run_id or f"compare-{cfg.preset}-N{cfg.n}-{key[:8]}"
            cmd_compare(configs, cfg.outdir, run_id)
    except (ConfigurationError, TypeError) as exc:
        print(f"gpmelab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DomainError) as exc:
        ctx = ", ".join(f"{k}={getattr(exc, k)}" for k in ("step", "node", "residual")
                        if getattr(exc, k, None) is not None)
        print(f"gpmelab: numerical failure: {exc}" + (f" ({ctx})" if ctx else ""), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
