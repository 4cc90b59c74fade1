"""Command-line front end: ``ibmdiff {run,compare,sweep,fit-beta,reference}``.

Configuration files are INI-style (``[section]`` headers, ``key = value``).
Lengths and times accept ``um``/``us`` suffixes (also ``m``, ``s``, ``nm``,
``ns``) and are converted to SI when parsed.  Every command writes CSV
files plus a ``manifest.json`` whose ``config`` block parses back into the
identical resolved configuration.
"""

import argparse
import configparser
import csv
from dataclasses import asdict, dataclass, replace
import json
import math
import os
import re
import sys
import time

import numpy as np

from . import __version__, analytics
from .closure import Algorithm, AlgorithmSpec, BCKind, BoundaryConditionSpec
from .errors import ConfigError, IBMDiffError, StabilityViolation
from .kernels import BasisFamily, Cosine, CubicSpline, PowerOfDistance
from .metrics import (
    TABLE1,
    TABLE2,
    Case,
    Study,
    argmin_beta,
    beta_grid,
    boundary_error_report,
    fit_beta_opt,
    free_space_run,
    sweep,
)
from .solver import ClosureModel, Simulation, Staircase

EXIT_CONFIG = 2
EXIT_STABILITY = 3
EXIT_STRICT = 4

_UNITS = {"": 1.0, "m": 1.0, "s": 1.0, "um": 1e-6, "us": 1e-6, "nm": 1e-9, "ns": 1e-9}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z]*)\s*$")


def parse_quantity(text, field="value"):
    """``"0.5um"`` -> ``5e-7``; bare numbers are taken as SI."""
    m = _NUMBER.match(str(text))
    if not m or m.group(2).lower() not in _UNITS:
        raise ConfigError(f"{field}: cannot parse quantity {text!r}")
    return float(m.group(1)) * _UNITS[m.group(2).lower()]


def _fmt(x):
    return repr(float(x))


# -- configuration ------------------------------------------------------------------


@dataclass(frozen=True)
class ModelChoice:
    """A boundary model as named on the command line or in ``[model]``."""

    name: str = "ecmls"
    basis: str = "incomplete_quartic"
    weight: str = "spline"
    beta: float = 2.75
    kappa: float = 100.0
    p: float = 2.0

    def build(self):
        if self.name == "staircase":
            return Staircase()
        try:
            alg = Algorithm(self.name)
            basis = BasisFamily.parse(self.basis)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
        if self.weight == "spline":
            weight, stencil = CubicSpline(self.beta), None
        elif self.weight == "cosine":
            weight, stencil = Cosine(self.beta), None
        elif self.weight == "power":
            weight, stencil = PowerOfDistance(self.p), self.beta
        else:
            raise ConfigError(f"weight: unknown weight function {self.weight!r}")
        return ClosureModel(AlgorithmSpec(alg, basis, weight, self.kappa, stencil))

    @classmethod
    def parse(cls, text, base=None):
        """``name[:basis[:weight[:beta[:kappa]]]]``; missing parts come from ``base``."""
        base = base or cls()
        parts = [p.strip() for p in text.split(":")]
        if not parts[0]:
            raise ConfigError(f"models: empty model name in {text!r}")
        name = parts[0].lower()
        if name == "staircase":
            return cls(name="staircase", basis="", weight="", beta=0.0, kappa=0.0, p=0.0)
        out = replace(base, name=name)
        if len(parts) > 1 and parts[1]:
            out = replace(out, basis=BasisFamily.parse(parts[1]).value)
        if len(parts) > 2 and parts[2]:
            out = replace(out, weight=parts[2].lower())
        try:
            if len(parts) > 3 and parts[3]:
                out = replace(out, beta=float(parts[3]))
            if len(parts) > 4 and parts[4]:
                out = replace(out, kappa=float(parts[4]))
        except ValueError:
            raise ConfigError(f"models: non-numeric parameter in {text!r}") from None
        return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration, all quantities SI."""

    R: float
    n_cells: int
    dx: float
    dt: float
    D: float
    t_end: float
    snapshots: tuple
    probe_stride: int
    bc_kind: str
    bc_value: float
    model: ModelChoice
    t_eval: float
    criterion: str
    time_scaling: str
    R_ref: float

    @property
    def case(self):
        return Case(self.R, self.n_cells, self.dx, self.dt, self.D, self.t_eval, label=f"R={self.R:g}m {self.n_cells}")

    @property
    def bc(self):
        return BoundaryConditionSpec(BCKind(self.bc_kind), self.bc_value, self.D)

    def to_sections(self):
        m = self.model
        return {
            "case": {
                "R": _fmt(self.R),
                "n_cells": str(self.n_cells),
                "dx": _fmt(self.dx),
                "dt": _fmt(self.dt),
                "D": _fmt(self.D),
                "t_end": _fmt(self.t_end),
                "snapshots": ", ".join(_fmt(t) for t in self.snapshots),
                "probe_stride": str(self.probe_stride),
            },
            "boundary": {"kind": self.bc_kind, "value": _fmt(self.bc_value)},
            "model": {
                "name": m.name,
                "basis": m.basis,
                "weight": m.weight,
                "beta": _fmt(m.beta),
                "kappa": _fmt(m.kappa),
                "p": _fmt(m.p),
            },
            "analysis": {
                "t_eval": _fmt(self.t_eval),
                "criterion": self.criterion,
                "time_scaling": self.time_scaling,
                "R_ref": _fmt(self.R_ref),
            },
        }


_PRESETS = {f"table1-{n}": c for n, c in TABLE1.items()}
_PRESETS.update({f"table2-{i + 1}": c for i, c in enumerate(TABLE2)})


def parse_sections(sections):
    """Resolve a ``{section: {key: text}}`` mapping into a :class:`RunConfig`."""
    sec = {name.lower(): {k.lower(): v for k, v in body.items()} for name, body in sections.items()}
    case = dict(sec.get("case", {}))
    preset = case.pop("preset", None)
    base = {}
    if preset is not None:
        if preset.strip().lower() not in _PRESETS:
            raise ConfigError(f"case.preset: unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
        p = _PRESETS[preset.strip().lower()]
        base = {"r": p.R, "n_cells": p.n_cells, "dx": p.dx, "dt": p.dt, "d": p.D}

    def quantity(key, default=None):
        if key in case:
            return parse_quantity(case[key], key if key != "d" else "D")
        if key in base:
            return base[key]
        if default is None:
            raise ConfigError(f"missing required field {'D' if key == 'd' else key} in [case]")
        return default

    R = quantity("r")
    D = quantity("d")
    dx = quantity("dx")
    dt = quantity("dt")
    try:
        n_cells = int(case["n_cells"]) if "n_cells" in case else int(base["n_cells"])
    except KeyError:
        raise ConfigError("missing required field n_cells in [case]") from None
    except ValueError:
        raise ConfigError(f"n_cells: not an integer: {case['n_cells']!r}") from None
    analysis = sec.get("analysis", {})
    t_eval = parse_quantity(analysis.get("t_eval", "30us"), "t_eval")
    t_end = quantity("t_end", t_eval)
    if "snapshots" in case:
        snaps = tuple(parse_quantity(s, "snapshots") for s in case["snapshots"].split(",") if s.strip())
    else:
        snaps = (t_end,)
    try:
        stride = int(case.get("probe_stride", "0"))
    except ValueError:
        raise ConfigError(f"probe_stride: not an integer: {case['probe_stride']!r}") from None
    if min((R, D, dx, dt)) <= 0 or n_cells <= 0:
        raise ConfigError("R, D, dx, dt and n_cells must be positive")

    bnd = sec.get("boundary", {})
    kind = bnd.get("kind", "neumann").strip().lower()
    if kind not in ("neumann", "dirichlet"):
        raise ConfigError(f"boundary.kind: expected neumann or dirichlet, got {kind!r}")
    try:
        bc_value = float(bnd.get("value", "0"))
    except ValueError:
        raise ConfigError(f"boundary.value: not a number: {bnd['value']!r}") from None

    mod = sec.get("model", {})
    try:
        choice = ModelChoice(
            name=mod.get("name", "ecmls").strip().lower(),
            basis=BasisFamily.parse(mod["basis"]).value if mod.get("basis") else ModelChoice.basis,
            weight=mod.get("weight", "spline").strip().lower(),
            beta=float(mod.get("beta", "2.75")),
            kappa=float(mod.get("kappa", "100")),
            p=float(mod.get("p", "2")),
        )
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None
    if choice.name == "staircase":
        choice = ModelChoice.parse("staircase")
    criterion = analysis.get("criterion", "peak").strip().lower()
    if criterion not in ("peak", "avg"):
        raise ConfigError(f"analysis.criterion: expected peak or avg, got {criterion!r}")
    scaling = analysis.get("time_scaling", "fixed").strip().lower()
    if scaling not in ("fixed", "diffusive"):
        raise ConfigError(f"analysis.time_scaling: expected fixed or diffusive, got {scaling!r}")
    R_ref = parse_quantity(analysis.get("r_ref", "0.5um"), "R_ref")
    return RunConfig(
        R=R, n_cells=n_cells, dx=dx, dt=dt, D=D, t_end=t_end, snapshots=snaps, probe_stride=stride,
        bc_kind=kind, bc_value=bc_value, model=choice, t_eval=t_eval, criterion=criterion,
        time_scaling=scaling, R_ref=R_ref,
    )


def load_config(path):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_sections({s: dict(parser[s]) for s in parser.sections()})


def default_config():
    return parse_sections({"case": {"preset": "table1-100"}})


# -- output helpers --------------------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (_fmt(v) if isinstance(v, (float, np.floating)) else v) for v in row])
    return path


def _write_manifest(out, command, cfg, outputs, started, failures=None, extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.to_sections() if cfg is not None else None,
        "wall_clock_s": time.time() - started,
        "outputs": [os.path.basename(p) for p in outputs],
        "failures": failures or {},
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _range(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--range: expected LO:HI:STEP, got {text!r}") from None
    try:
        return beta_grid(lo, hi, step)
    except ValueError as exc:
        raise ConfigError(f"--range: {exc}") from None


def _eval_time(cfg, args, case=None):
    t = args.time if getattr(args, "time", None) is not None else cfg.t_eval
    if case is not None and cfg.time_scaling == "diffusive":
        t = t * (case.R / cfg.R_ref) ** 2
    return t


# -- commands ----------------------------------------------------------------------------


def cmd_run(cfg, args):
    started = time.time()
    out = args.out
    os.makedirs(out, exist_ok=True)
    case = cfg.case
    study = Study(case)
    model = cfg.model.build()
    sc = replace(study.config(model, t_end=cfg.t_end), snapshot_times=cfg.snapshots, probe_stride=cfg.probe_stride, bc=cfg.bc)
    sim = Simulation(sc, classification=study.classification)
    res = sim.run()
    if args.strict and res.failures:
        _write_manifest(out, "run", cfg, [], started, failures={str(k): str(v) for k, v in res.failures.items()})
        return EXIT_STRICT
    outputs = []
    grid = study.grid
    X, Y = grid.coordinates()
    labels = study.classification.labels
    for t in cfg.snapshots:
        arr = res.snapshot(t)
        rows = (
            (j, k, float(X[j, 0]), float(Y[0, k]), int(labels[j, k]), float(arr[j, k]))
            for j in range(grid.shape[0])
            for k in range(grid.shape[1])
        )
        outputs.append(_write_csv(os.path.join(out, f"snapshot_{sc.steps_for(t):08d}.csv"),
                                  ["j", "k", "x_m", "y_m", "node_class", "c"], rows))
    outputs.append(_write_csv(os.path.join(out, "probes.csv"),
                              ["t_s", "node", "c_fd", "c_ana", "cerror", "cerror_comp"], _probe_rows(study, cfg, res)))
    outputs.append(_write_manifest(out, "run", cfg, outputs, started,
                                   failures={str(k): str(v) for k, v in res.failures.items()},
                                   extra={"steps": sc.n_steps}))
    return 0


def _probe_rows(study, cfg, res):
    """Probe CSV rows; error columns stay empty where the analytical value is unusable."""
    times = [float(t) for t in res.probe_times]
    positive = [t for t in times if t > 0]
    ref = None
    if positive and cfg.bc.is_zero_flux:
        ref = free_space_run(cfg.D, study.grid.dx, study.grid.dy, cfg.dt, max(positive), positive,
                             study.offsets, R=cfg.R)
    index = {node: i for i, node in enumerate(study.ibn)}
    cols = [index[tuple(n)] for n in res.probe_nodes]
    radii = np.minimum(study.radii[cols], cfg.R)
    for row, t in enumerate(times):
        ana = flag = free = nobc = None
        if t > 0 and cfg.bc.is_zero_flux:
            s = analytics.c_bounded(radii, t, cfg.R, cfg.D)
            ana, flag = s.value, s.cancellation_flag
            free = analytics.c_free(study.radii[cols], t, cfg.D)
            nobc = ref.at(t)[cols]
        for i, node in enumerate(res.probe_nodes):
            c_fd = float(res.probes[row, i])
            if ana is None:
                yield (t, f"{node[0]}:{node[1]}", c_fd, None, None, None)
                continue
            ok = not flag[i] and ana[i] != 0
            yield (
                t,
                f"{node[0]}:{node[1]}",
                c_fd,
                float(ana[i]),
                abs((c_fd - ana[i]) / ana[i]) if ok else None,
                abs(((c_fd - ana[i]) - (nobc[i] - free[i])) / ana[i]) if ok else None,
            )


def _require_zero_flux(cfg):
    if not cfg.bc.is_zero_flux:
        raise ConfigError("error reports need the zero-flux boundary of the analytical reference")


def cmd_compare(cfg, args):
    started = time.time()
    _require_zero_flux(cfg)
    os.makedirs(args.out, exist_ok=True)
    names = args.models or cfg.model.name
    choices = [ModelChoice.parse(m, cfg.model) for m in names.split(",") if m.strip()]
    if not choices:
        raise ConfigError("--models: empty model list")
    study = Study(replace(cfg.case, t_eval=_eval_time(cfg, args)))
    rows, failures = [], {}
    for ch in choices:
        rep = study.report(ch.build())
        stair = ch.name == "staircase"
        rows.append((ch.name, "" if stair else ch.basis, "" if stair else ch.weight,
                     None if stair else ch.beta, None if stair else ch.kappa,
                     rep.peak_comp, rep.avg_comp, rep.failures))
        if rep.failures:
            failures[ch.name + ":" + ch.basis] = rep.failures
    path = _write_csv(os.path.join(args.out, "compare.csv"),
                      ["model", "basis", "weight", "beta", "kappa", "peak_comp", "avg_comp", "failures"], rows)
    _write_manifest(args.out, "compare", cfg, [path], started, failures,
                    extra={"models": [asdict(ch) for ch in choices], "t_eval_s": study.case.t_eval})
    return EXIT_STRICT if args.strict and failures else 0


def cmd_sweep(cfg, args):
    started = time.time()
    _require_zero_flux(cfg)
    os.makedirs(args.out, exist_ok=True)
    if cfg.model.name == "staircase":
        raise ConfigError("sweeps need a closure model in [model]")
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--values: not a number list: {args.values!r}") from None
    elif args.range:
        values = list(_range(args.range))
    else:
        raise ConfigError("sweep needs --range LO:HI:STEP or --values LIST")
    study = Study(replace(cfg.case, t_eval=_eval_time(cfg, args)))
    res = sweep(study, cfg.model.build().alg, args.axis, values, workers=args.workers)
    rows = zip(res.values.tolist(), res.peak_comp.tolist(), res.avg_comp.tolist(), res.failures.tolist())
    path = _write_csv(os.path.join(args.out, "sweep.csv"), [args.axis, "peak_comp", "avg_comp", "failures"], rows)
    failed = {_fmt(v): int(f) for v, f in zip(res.values, res.failures) if f}
    _write_manifest(args.out, "sweep", cfg, [path], started, failed,
                    extra={"axis": args.axis, "values": res.values.tolist(), "t_eval_s": study.case.t_eval})
    return EXIT_STRICT if args.strict and failed else 0


def _case_list(text):
    if text is None or not text.strip():
        raise ConfigError("fit-beta: empty case list (use --cases table2 or 1-based indices like 1,2,6)")
    if text.strip().lower() == "table2":
        return list(TABLE2)
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            i = int(tok)
        except ValueError:
            raise ConfigError(f"--cases: not an index: {tok!r}") from None
        if not 1 <= i <= len(TABLE2):
            raise ConfigError(f"--cases: index {i} outside 1..{len(TABLE2)}")
        out.append(TABLE2[i - 1])
    if not out:
        raise ConfigError("fit-beta: empty case list")
    return out


def cmd_fit_beta(cfg, args):
    started = time.time()
    os.makedirs(args.out, exist_ok=True)
    cases = _case_list(args.cases)
    if len(cases) < 3:
        raise ConfigError("fit-beta needs at least 3 cases")
    betas = _range(args.range or "1.0:6.0:0.0625")
    base = cfg.model
    if base.name == "staircase" or base.weight != "spline":
        raise ConfigError("fit-beta scans the cubic-spline beta of a closure model")
    rows, points, skipped = [], [], {}
    for case in cases:
        case = replace(case, D=cfg.D, t_eval=_eval_time(cfg, args, case))
        study = Study(case)
        ratio = math.log10(case.R / case.dx)
        status, beta = "ok", None
        if not study.reference_precise:
            status = "imprecise"
        else:
            res = sweep(study, base.build().alg, "beta", betas, workers=args.workers)
            try:
                beta = argmin_beta(res, cfg.criterion)
                points.append((ratio, beta))
            except IBMDiffError as exc:
                status = type(exc).__name__
        if status != "ok":
            skipped[case.label] = status
        rows.append((case.label, case.R, case.n_cells, case.dx, case.dt, case.t_eval, ratio, beta, status))
    fit = fit_beta_opt(points)
    rows.append(("fit", None, None, None, None, None, None, None,
                 f"slope={_fmt(fit.slope)};intercept={_fmt(fit.intercept)};rms={_fmt(fit.residual_rms)}"))
    header = ["case", "R_m", "n_cells", "dx_m", "dt_s", "t_eval_s", "log10_R_over_dx", "beta_opt", "status"]
    path = _write_csv(os.path.join(args.out, "fit.csv"), header, rows)
    _write_manifest(args.out, "fit-beta", cfg, [path], started, skipped,
                    extra={"slope": fit.slope, "intercept": fit.intercept, "residual_rms": fit.residual_rms})
    return 0


def cmd_reference(cfg, args):
    started = time.time()
    os.makedirs(args.out, exist_ok=True)
    times = [args.time] if args.time is not None else list(cfg.snapshots)
    radii = np.linspace(0.0, cfg.R, args.points)
    rows = []
    for t in times:
        if not t > 0:
            raise ConfigError("reference times must be positive")
        s = analytics.c_bounded(radii, t, cfg.R, cfg.D)
        free = analytics.c_free(radii, t, cfg.D)
        rows.extend((float(r), float(t), float(v), float(f), int(bool(fl)))
                    for r, v, f, fl in zip(radii, s.value, free, s.cancellation_flag))
    path = _write_csv(os.path.join(args.out, "reference.csv"),
                      ["r_m", "t_s", "c_bounded", "c_free", "cancellation_flag"], rows)
    _write_manifest(args.out, "reference", cfg, [path], started, extra={"times_s": times})
    return 0


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "fit-beta": cmd_fit_beta,
    "reference": cmd_reference,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="ibmdiff", description="Immersed-boundary diffusion experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration file (default: 100-interval table-1 case)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--time", type=lambda s: parse_quantity(s, "--time"), help="evaluation time, e.g. 30us")
        p.add_argument("--strict", action="store_true", help="exit 4 when any ghost closure is irregular")
        p.add_argument("--workers", type=int, default=1)
        if name == "compare":
            p.add_argument("--models", help="comma list of name[:basis[:weight[:beta[:kappa]]]]")
        if name == "sweep":
            p.add_argument("--axis", choices=("beta", "kappa", "p"), required=True)
            p.add_argument("--range", help="LO:HI:STEP")
            p.add_argument("--values", help="explicit comma list, e.g. 0,1,10,100")
        if name == "fit-beta":
            p.add_argument("--cases", help="'table2' or 1-based table-2 indices")
            p.add_argument("--range", help="beta scan LO:HI:STEP (default 1:6:0.0625)")
        if name == "reference":
            p.add_argument("--points", type=int, default=101, help="radial samples on [0, R]")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityViolation as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except IBMDiffError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
