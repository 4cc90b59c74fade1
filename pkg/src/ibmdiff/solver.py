"""Explicit FTCS time stepping with staircase or ghost-closure boundaries."""

from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from .closure import AlgorithmSpec, BoundaryConditionSpec, build_all_closures
from .errors import StabilityViolation
from .geometry import CircleBoundary, GridSpec, NodeClass, classify_nodes


@dataclass(frozen=True)
class Staircase:
    """Axis-wise mirror of the boundary condition on grid lines."""

    name = "staircase"


@dataclass(frozen=True)
class ClosureModel:
    alg: AlgorithmSpec

    @property
    def name(self):
        return self.alg.algorithm.value


@dataclass(frozen=True)
class NoBoundary:
    """Reflection-free run: every node except the outer ring is updated."""

    name = "noboundary"


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    boundary: CircleBoundary
    D: float
    dt: float
    model: object = Staircase()
    bc: BoundaryConditionSpec = field(default_factory=BoundaryConditionSpec)
    t_end: float = 0.0
    snapshot_times: tuple = ()
    probe_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if self.D <= 0 or self.dt <= 0:
            raise ValueError("D and dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        lx, ly = self.lambdas
        if lx > 0.5 or ly > 0.5:
            raise StabilityViolation(
                f"D*dt/dx^2 = {lx:.6g}, D*dt/dy^2 = {ly:.6g}; both must be <= 1/2"
            )

    @property
    def lambdas(self):
        return (self.D * self.dt / self.grid.dx**2, self.D * self.dt / self.grid.dy**2)

    def steps_for(self, t):
        n = round(t / self.dt)
        if abs(n * self.dt - t) > 1e-6 * self.dt:
            raise ValueError(f"time {t!r} is not a multiple of dt = {self.dt!r}")
        return n

    @property
    def n_steps(self):
        return self.steps_for(self.t_end)


@dataclass
class FieldState:
    values: np.ndarray
    step_index: int
    dt: float

    @property
    def time(self):
        return self.step_index * self.dt


@dataclass
class RunResult:
    config: SimConfig
    snapshots: dict
    probe_nodes: list
    probe_steps: np.ndarray
    probes: np.ndarray
    mass: np.ndarray
    failures: dict
    classification: object = None

    @property
    def probe_times(self):
        return self.probe_steps * self.config.dt

    def snapshot(self, t):
        n = self.config.steps_for(t)
        for key, arr in self.snapshots.items():
            if self.config.steps_for(key) == n:
                return arr
        raise KeyError(f"no snapshot at t = {t}")


class Simulation:
    """Precomputed geometry, closures and buffers for one configuration."""

    def __init__(self, config, backend=None, closures=None, classification=None):
        self.config = config
        self.kern = _backend if backend is None else _backend.get(backend)
        grid = config.grid
        self.center = grid.center_index(config.boundary)
        self.closures = None
        self._gather = None
        if isinstance(config.model, NoBoundary):
            self.classification = None
            active = np.ones(grid.shape, dtype=np.uint8)
            active[0, :] = active[-1, :] = active[:, 0] = active[:, -1] = 0
        else:
            self.classification = classification or classify_nodes(grid, config.boundary)
            active = self.classification.interior.astype(np.uint8)
            if isinstance(config.model, ClosureModel):
                self.closures = closures or build_all_closures(
                    self.classification, grid, config.boundary, config.model.alg, config.bc
                )
                self._gather = self.closures.gather_arrays(grid)
        self.active = np.ascontiguousarray(active)
        jj, kk = np.nonzero(self.active)
        self.box = (int(jj.min()), int(jj.max()) + 1, int(kk.min()), int(kk.max()) + 1)
        self._staircase_arms = None

    # -- operations -----------------------------------------------------

    def init_delta(self):
        g = self.config.grid
        values = np.zeros(g.shape)
        values[self.center] = 1.0 / (g.dx * g.dy)
        return FieldState(values=values, step_index=0, dt=self.config.dt)

    def staircase_arm_values(self, values):
        """Per-arm ghost values ``{(ibn, neighbor): value}`` of the staircase model."""
        if self._staircase_arms is None:
            lab = self.classification.labels
            arms = []
            for j, k in self.classification.ibn:
                for dj, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    if lab[j + dj, k + dk] >= NodeClass.GP:
                        arms.append(((j, k), (j + dj, k + dk)))
            self._staircase_arms = arms
        bc = self.config.bc
        const = self._staircase_gamma()
        return {arm: bc.eta * values[arm[0]] + const for arm in self._staircase_arms}

    def _staircase_gamma(self):
        bc = self.config.bc
        if bc.kind.value == "neumann":
            if not bc.is_zero_flux:
                raise NotImplementedError("staircase model supports zero-flux Neumann or Dirichlet data")
            return 0.0
        if callable(bc.value):
            raise NotImplementedError("staircase Dirichlet data must be constant")
        return 2.0 * float(bc.value)

    def fill_ghosts(self, state):
        """Refresh GP values in place (closure model); staircase returns arm values."""
        model = self.config.model
        if isinstance(model, ClosureModel):
            self.kern.fill_ghosts(state.values.reshape(-1), *self._gather)
            return {gp: state.values[gp] for gp in self.closures.closures}
        if isinstance(model, Staircase):
            return self.staircase_arm_values(state.values)
        return {}

    def _step_into(self, c_in, c_out, box=None):
        j0, j1, k0, k1 = self.box if box is None else box
        lx, ly = self.config.lambdas
        if isinstance(self.config.model, Staircase):
            self.kern.ftcs_step(
                c_in, c_out, self.active, lx, ly, j0, j1, k0, k1, True, self.config.bc.eta, self._staircase_gamma()
            )
        else:
            self.kern.ftcs_step(c_in, c_out, self.active, lx, ly, j0, j1, k0, k1)

    def step(self, state):
        """One FTCS step after a ghost refresh; returns a new state."""
        self.fill_ghosts(state)
        out = state.values.copy()
        self._step_into(state.values, out)
        return FieldState(values=out, step_index=state.step_index + 1, dt=state.dt)

    def interior_mass(self, values):
        g = self.config.grid
        return float(np.sum(values[self.active.astype(bool)])) * g.dx * g.dy

    def _growth_box(self, n):
        # delta release: values outside the Manhattan reach n are exactly zero
        j0, j1, k0, k1 = self.box
        cj, ck = self.center
        r = n + 1
        return (max(j0, cj - r), min(j1, cj + r + 1), max(k0, ck - r), min(k1, ck + r + 1))

    def run(self, probe_nodes=None, initial=None):
        """Advance to ``t_end`` from a delta release (or ``initial``)."""
        cfg = self.config
        n_steps = cfg.n_steps
        snap_steps = {}
        for t in cfg.snapshot_times:
            n = cfg.steps_for(t)
            if n > n_steps:
                raise ValueError(f"snapshot time {t} beyond t_end {cfg.t_end}")
            snap_steps.setdefault(n, []).append(t)
        if probe_nodes is None:
            probe_nodes = list(self.classification.ibn) if self.classification is not None else []
        pj = np.array([p[0] for p in probe_nodes], dtype=np.intp)
        pk = np.array([p[1] for p in probe_nodes], dtype=np.intp)
        stride = cfg.probe_stride
        probe_steps = list(range(0, n_steps + 1, stride)) if stride > 0 else sorted(snap_steps)
        probe_set = set(probe_steps)
        probes = np.empty((len(probe_steps), len(probe_nodes)))
        mass = np.empty(len(probe_steps))

        state = self.init_delta() if initial is None else initial
        a = state.values.copy()
        b = a.copy()
        use_growth = initial is None and not isinstance(cfg.model, ClosureModel)
        snapshots = {}
        row = 0
        mask = self.active.astype(bool)
        g = cfg.grid
        for n in range(n_steps + 1):
            self._refresh(a)
            if n in probe_set:
                probes[row] = a[pj, pk]
                mass[row] = float(np.sum(a[mask])) * g.dx * g.dy
                row += 1
            if n in snap_steps:
                for t in snap_steps[n]:
                    snapshots[t] = a.copy()
            if n == n_steps:
                break
            self._step_into(a, b, self._growth_box(n) if use_growth else None)
            a, b = b, a
        return RunResult(
            config=cfg,
            snapshots=snapshots,
            probe_nodes=list(probe_nodes),
            probe_steps=np.array(probe_steps, dtype=np.int64),
            probes=probes,
            mass=mass,
            failures=dict(self.closures.failures) if self.closures is not None else {},
            classification=self.classification,
        )

    def _refresh(self, values):
        if self._gather is not None:
            self.kern.fill_ghosts(values.reshape(-1), *self._gather)


def init_delta(config):
    return Simulation(config).init_delta()


def step_ftcs(state, config, sim=None):
    return (sim or Simulation(config)).step(state)


def run(config, backend=None):
    return Simulation(config, backend=backend).run()

