"""Boundary error measures, reflection-free reference runs, parameter sweeps and the beta fit."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from scipy.optimize import minimize_scalar

from . import analytics
from . import backend as _backend
from .closure import Algorithm, AlgorithmSpec, BoundaryConditionSpec, collect_stencil, ghost_geometry
from .errors import (
    AllFailed,
    DegenerateAbscissae,
    DivisionByZeroConcentration,
    PrecisionLossAtReference,
    ReferenceDomainTooSmall,
)
from .geometry import CircleBoundary, GridSpec, classify_nodes
from .kernels import BasisFamily, CubicSpline, PowerOfDistance
from .solver import ClosureModel, SimConfig, Simulation, Staircase

EDGE_LIMIT = 1e-200


def cs_rel(c_neighbor, c_boundary):
    """Relative concentration step between a neighbor and a boundary point."""
    if c_boundary == 0:
        raise DivisionByZeroConcentration("boundary concentration is zero")
    return (c_neighbor - c_boundary) / c_boundary


def cerror(c_fd, c_ana):
    if c_ana == 0:
        raise DivisionByZeroConcentration("analytical concentration is zero")
    return abs((c_fd - c_ana) / c_ana)


def cerror_comp(c_fd_bc, c_ana_bc, c_fd_nobc, c_ana_nobc):
    """Relative error with the inherent (boundary-free) FD error subtracted."""
    if c_ana_bc == 0:
        raise DivisionByZeroConcentration("analytical concentration is zero")
    return abs(((c_fd_bc - c_ana_bc) - (c_fd_nobc - c_ana_nobc)) / c_ana_bc)


# -- reflection-free reference ------------------------------------------------


def _tail_log_bound(k, n, lam, c0):
    # Chernoff bound on the lazy-walk probability of an x-displacement >= k after n steps
    def f(theta):
        return -theta * k + n * math.log1p(2.0 * lam * (math.cosh(theta) - 1.0))

    res = minimize_scalar(f, bounds=(1e-9, 60.0), method="bounded")
    return math.log(c0) + min(res.fun, 0.0)


def tail_reach(n_steps, lam, c0, limit=EDGE_LIMIT):
    """Smallest lattice offset whose FD value is provably below ``limit`` after ``n_steps``."""
    if n_steps == 0:
        return 1
    target = math.log(limit)
    lo, hi = 0, n_steps + 1  # beyond n_steps the value is exactly zero
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _tail_log_bound(mid, n_steps, lam, c0) < target:
            hi = mid
        else:
            lo = mid
    return hi


def reference_half_width(R, dx, dy, D, dt, t_end):
    """Half-widths (cells) of the reflection-free lattice along x and y."""
    n = round(t_end / dt)
    c0 = 1.0 / (dx * dy)
    out = []
    for step in (dx, dy):
        lam = D * dt / step**2
        base = max(math.ceil(2 * R / step), math.ceil(R / step) + 20)
        out.append(max(base, tail_reach(n, lam, c0) + 2))
    return tuple(out)


@dataclass
class ReferenceRun:
    """Boundary-free FD values at lattice offsets from the release node."""

    times: tuple
    offsets: np.ndarray
    values: dict
    edge_max: float
    half_width: tuple

    def at(self, t):
        for key, arr in self.values.items():
            if math.isclose(key, t, rel_tol=1e-9, abs_tol=1e-18):
                return arr
        raise KeyError(t)


def free_space_run(D, dx, dy, dt, t_end, times, offsets, half_width=None, R=None, backend=None):
    """Delta release on an unbounded lattice, integrated on one mirrored quadrant.

    The field is symmetric under ``x -> -x`` and ``y -> -y``, so only offsets
    ``>= 0`` are stored; index 0 of each axis mirrors offset 1.  The outer
    ring is held at zero and must stay below ``EDGE_LIMIT`` at ``t_end``.
    """
    kern = _backend if backend is None else _backend.get(backend)
    if half_width is None:
        half_width = reference_half_width(R, dx, dy, D, dt, t_end)
    hx, hy = half_width
    offsets = np.abs(np.asarray(offsets, dtype=np.intp).reshape(-1, 2))
    if np.any(offsets[:, 0] >= hx) or np.any(offsets[:, 1] >= hy):
        raise ReferenceDomainTooSmall("requested offsets reach the reference lattice edge")
    lamx, lamy = D * dt / dx**2, D * dt / dy**2
    n_steps = round(t_end / dt)
    want = {}
    for t in times:
        want.setdefault(round(t / dt), []).append(float(t))
    a = np.zeros((hx + 2, hy + 2))
    a[1, 1] = 1.0 / (dx * dy)
    b = a.copy()
    active = np.zeros_like(a, dtype=np.uint8)
    active[1:hx + 1, 1:hy + 1] = 1
    oj, ok = offsets[:, 0] + 1, offsets[:, 1] + 1
    values = {}
    for n in range(n_steps + 1):
        if n in want:
            for t in want[n]:
                values[t] = a[oj, ok].copy()
        if n == n_steps:
            break
        a[0, :] = a[2, :]
        a[:, 0] = a[:, 2]
        r = n + 2
        kern.ftcs_step(a, b, active, lamx, lamy, 1, min(hx + 1, r + 1), 1, min(hy + 1, r + 1))
        a, b = b, a
    edge = max(float(np.max(np.abs(a[hx, 1:hy + 1]))), float(np.max(np.abs(a[1:hx + 1, hy]))))
    if edge >= EDGE_LIMIT:
        raise ReferenceDomainTooSmall(f"edge value {edge:.3e} is not below {EDGE_LIMIT:g}")
    return ReferenceRun(times=tuple(values), offsets=offsets, values=values, edge_max=edge, half_width=(hx, hy))


# -- reports -------------------------------------------------------------------


@dataclass(frozen=True)
class IBNRecord:
    node: tuple
    c_fd: float
    c_ana: float
    cerror: float
    cerror_comp: float


@dataclass
class ErrorReport:
    time: float
    records: list
    peak_comp: float
    avg_comp: float
    failures: int
    warnings: list = field(default_factory=list)

    @property
    def peak(self):
        return max(r.cerror for r in self.records)


def boundary_error_report(c_fd_bc, c_ana_bc, c_fd_nobc, c_ana_nobc, nodes, t, failures=0, flagged=None):
    """Per-IBN errors and their peak and mean compensated values."""
    if flagged is not None and np.any(flagged):
        raise PrecisionLossAtReference(f"analytical reference cancellation-flagged at t = {t}")
    recs = [
        IBNRecord(
            node=tuple(node),
            c_fd=float(c_fd_bc[i]),
            c_ana=float(c_ana_bc[i]),
            cerror=cerror(c_fd_bc[i], c_ana_bc[i]),
            cerror_comp=cerror_comp(c_fd_bc[i], c_ana_bc[i], c_fd_nobc[i], c_ana_nobc[i]),
        )
        for i, node in enumerate(nodes)
    ]
    comp = np.array([r.cerror_comp for r in recs])
    return ErrorReport(
        time=t,
        records=recs,
        peak_comp=float(comp.max()),
        avg_comp=float(comp.sum() / len(comp)),
        failures=int(failures),
    )


# -- experiment cases ------------------------------------------------------------

UM = 1e-6
US = 1e-6


@dataclass(frozen=True)
class Case:
    """One physical configuration: circular hole, lattice and time step (SI units)."""

    R: float
    n_cells: int
    dx: float
    dt: float
    D: float = 1e-10
    t_eval: float = 30 * US
    label: str = ""

    @property
    def boundary(self):
        return CircleBoundary((0.0, 0.0), self.R)

    @property
    def grid(self):
        return GridSpec.around(self.boundary, self.n_cells, self.dx)

    @property
    def curvature_ratio(self):
        return self.R / self.dx


TABLE1 = {
    100: Case(0.5 * UM, 100, 0.01 * UM, 0.1 * US, label="100x100"),
    200: Case(0.5 * UM, 200, 0.005 * UM, 0.025 * US, label="200x200"),
    400: Case(0.5 * UM, 400, 0.0025 * UM, 0.00625 * US, label="400x400"),
}

TABLE2 = [
    Case(r * UM, n, dx * UM, dt * US, label=f"R={r}um {n}x{n}")
    for r, n, dx, dt in [
        (0.0625, 50, 0.0025, 0.00625),
        (0.125, 50, 0.005, 0.025),
        (0.25, 50, 0.01, 0.1),
        (0.125, 100, 0.0025, 0.00625),
        (0.25, 100, 0.005, 0.025),
        (0.5, 100, 0.01, 0.1),
        (0.25, 200, 0.0025, 0.00625),
        (0.5, 200, 0.005, 0.025),
        (1.0, 200, 0.01, 0.1),
        (0.5, 400, 0.0025, 0.00625),
        (1.0, 400, 0.005, 0.025),
        (2.0, 400, 0.01, 0.1),
    ]
]


def spline_alg(algorithm, basis, beta, kappa=100.0):
    return AlgorithmSpec(Algorithm(algorithm), basis, CubicSpline(beta), kappa)


class Study:
    """Shared state for comparing boundary models on one :class:`Case`.

    The classification, the analytical references at the IBNs and the
    reflection-free FD reference are computed once and reused by every
    model evaluated at ``case.t_eval``.
    """

    def __init__(self, case, tol=1e-6, backend=None):
        self.case = case
        self.backend = backend
        self.tol = tol
        self.grid = case.grid
        self.boundary = case.boundary
        self.bc = BoundaryConditionSpec(D=case.D)
        self.classification = classify_nodes(self.grid, self.boundary)
        self.ibn = list(self.classification.ibn)
        self.center = self.grid.center_index(self.boundary)
        self.offsets = np.array([(j - self.center[0], k - self.center[1]) for j, k in self.ibn])
        self.radii = np.hypot(self.offsets[:, 0] * self.grid.dx, self.offsets[:, 1] * self.grid.dy)
        self._reference = None
        self._analytic = None

    def config(self, model, t_end=None, probe_stride=0):
        t_end = self.case.t_eval if t_end is None else t_end
        return SimConfig(
            grid=self.grid,
            boundary=self.boundary,
            D=self.case.D,
            dt=self.case.dt,
            model=model,
            bc=self.bc,
            t_end=t_end,
            snapshot_times=(t_end,),
            probe_stride=probe_stride,
        )

    @property
    def analytic(self):
        if self._analytic is None:
            t = self.case.t_eval
            res = analytics.c_bounded(np.minimum(self.radii, self.case.R), t, self.case.R, self.case.D, tol=self.tol)
            self._analytic = (res.value, res.cancellation_flag, analytics.c_free(self.radii, t, self.case.D))
        return self._analytic

    @property
    def reference_precise(self):
        return not np.any(self.analytic[1])

    @property
    def reference(self):
        if self._reference is None:
            c = self.case
            self._reference = free_space_run(
                c.D, self.grid.dx, self.grid.dy, c.dt, c.t_eval, (c.t_eval,), self.offsets, R=c.R, backend=self.backend
            )
        return self._reference

    def run(self, model):
        sim = Simulation(self.config(model), backend=self.backend, classification=self.classification)
        return sim, sim.run()

    def report(self, model):
        """Compensated boundary error report for one boundary model at ``t_eval``."""
        ana_bc, flagged, ana_free = self.analytic
        if np.any(flagged):
            raise PrecisionLossAtReference(
                f"{self.case.label}: analytical wall values lose precision at t = {self.case.t_eval}"
            )
        sim, res = self.run(model)
        snap = res.snapshot(self.case.t_eval)
        fd = np.array([snap[j, k] for j, k in self.ibn])
        nobc = self.reference.at(self.case.t_eval)
        rep = boundary_error_report(fd, ana_bc, nobc, ana_free, self.ibn, self.case.t_eval, failures=len(res.failures))
        if isinstance(model, ClosureModel):
            rep.warnings.extend(stencil_warnings(self, model.alg))
        return rep


def stencil_warnings(study, alg):
    """Warn when some GP stencil has fewer nodes than basis terms (plain MLS rank floor)."""
    m = alg.basis.m
    smallest = min(
        len(collect_stencil(ghost_geometry(gp, study.grid, study.boundary).gip, study.classification, study.grid,
                            alg.stencil_radius))
        for gp in study.classification.gp
    )
    if smallest < m:
        msg = f"stencil radius {alg.stencil_radius} gives {smallest} nodes < m = {m} for {alg.basis.value}"
        warnings.warn(msg, stacklevel=2)
        return [msg]
    return []


# -- sweeps ----------------------------------------------------------------------


@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    peak_comp: np.ndarray
    avg_comp: np.ndarray
    failures: np.ndarray
    reports: list = field(repr=False, default_factory=list)


def with_axis(alg, axis, value):
    """Copy of ``alg`` with one parameter replaced."""
    if axis == "kappa":
        return replace(alg, kappa=float(value))
    if axis == "beta":
        if isinstance(alg.weight, PowerOfDistance):
            return replace(alg, stencil_beta=float(value))
        return replace(alg, weight=type(alg.weight)(float(value)), stencil_beta=None)
    if axis == "p":
        stencil = alg.stencil_beta if alg.stencil_beta is not None else alg.weight.support
        return replace(alg, weight=PowerOfDistance(float(value)), stencil_beta=stencil)
    raise ValueError(f"unknown sweep axis {axis!r}")


_WORKER_STUDY = None


def _init_worker(study):
    global _WORKER_STUDY
    _WORKER_STUDY = study


def _report_one(alg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _WORKER_STUDY.report(ClosureModel(alg))


def sweep(study, base_alg, axis, values, workers=1):
    """One simulation and report per axis value, aggregated in increasing order."""
    values = np.array(sorted(float(v) for v in values))
    if len(values) == 0:
        raise ValueError("no sweep values")
    if np.any(np.diff(values) <= 0):
        raise ValueError("sweep values must be distinct")
    algs = [with_axis(base_alg, axis, v) for v in values]
    study.reference  # noqa: B018 - computed once before fan-out
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(study,)) as pool:
            reports = list(pool.map(_report_one, algs))
    else:
        _init_worker(study)
        reports = [_report_one(a) for a in algs]
    return SweepResult(
        axis=axis,
        values=values,
        peak_comp=np.array([r.peak_comp for r in reports]),
        avg_comp=np.array([r.avg_comp for r in reports]),
        failures=np.array([r.failures for r in reports]),
        reports=reports,
    )


def beta_grid(lo, hi, step):
    if not step > 0:
        raise ValueError("step must be positive")
    if not hi > lo:
        raise ValueError("beta range is degenerate")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def argmin_beta(result, criterion="peak"):
    """Sampled minimizer of the chosen error curve over failure-free values; ties go to smaller beta."""
    curve = result.peak_comp if criterion == "peak" else result.avg_comp
    ok = (result.failures == 0) & np.isfinite(curve)
    if not ok.any():
        raise AllFailed("every sampled value produced regularity failures")
    masked = np.where(ok, curve, np.inf)
    return float(result.values[int(np.argmin(masked))])


def find_beta_opt(study, lo, hi, step=0.0625, base_alg=None, criterion="peak", workers=1):
    """Scan beta on ``[lo, hi]`` and return ``(beta_opt, SweepResult)``."""
    if base_alg is None:
        base_alg = spline_alg("ecmls", BasisFamily.INCOMPLETE_QUARTIC, lo)
    res = sweep(study, base_alg, "beta", beta_grid(lo, hi, step), workers=workers)
    return argmin_beta(res, criterion), res


@dataclass(frozen=True)
class BetaFit:
    points: tuple
    slope: float
    intercept: float
    residual_rms: float

    def predict(self, ratio):
        return self.slope * math.log10(ratio) + self.intercept


def fit_beta_opt(points):
    """Least-squares line ``beta_opt = slope * log10(R_c/dx) + intercept``.

    ``points`` holds ``(log10(R_c/dx), beta_opt)`` pairs.
    """
    pts = tuple((float(a), float(b)) for a, b in points)
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if len(pts) < 3 or len(np.unique(xs)) < 2:
        raise DegenerateAbscissae("need at least 3 points spanning 2 distinct abscissae")
    A = np.column_stack([xs, np.ones_like(xs)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - (slope * xs + intercept)
    return BetaFit(pts, float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))
