"""Ghost-point closures: MLS, CMLS and ECMLS weighted least-squares fits.

For each ghost point (GP) the fit is centered on its ghost image point
(GIP), the mirror of the GP across the circle.  Solving the weighted
normal equations once per GP yields a time-independent linear functional

    c_GP = sum_s coeffs[s] * c[stencil[s]] + constant

which the time stepper evaluates before every step.

Ghost relation convention: for an interior point ``a`` and its mirror
``b`` across the boundary, ``c_b = eta * c_a + gamma`` with

* Neumann:   ``eta = 1``,  ``gamma = -(2 * delta / D) * flux(BI)``
* Dirichlet: ``eta = -1``, ``gamma = 2 * c(BI)``

where ``delta`` is the distance from ``a`` to the boundary intercept and
``flux`` is the outward normal flux.
"""

from dataclasses import dataclass, field
import enum
import math

import numpy as np
import scipy.linalg

from .errors import DegeneratePoint, EmptyStencil, RegularityFailure
from .geometry import project, project_many
from .kernels import PowerOfDistance, eval_basis, eval_weight

RCOND_MIN = 1e-12


class BCKind(enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class BoundaryConditionSpec:
    """Neumann flux or Dirichlet concentration on the circle.

    ``value`` is either a constant or a callable ``f(x, y)`` evaluated at
    boundary intercepts.  ``D`` converts Neumann flux to a normal gradient.
    """

    kind: BCKind = BCKind.NEUMANN
    value: object = 0.0
    D: float = 1.0

    @property
    def eta(self):
        return 1.0 if self.kind is BCKind.NEUMANN else -1.0

    def data_at(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if callable(self.value):
            return np.array([float(self.value(x, y)) for x, y in pts])
        return np.full(len(pts), float(self.value))

    def gamma(self, delta, bi):
        """Constant of the interior-to-mirror relation, per point."""
        data = self.data_at(bi)
        delta = np.asarray(delta, dtype=float).reshape(-1)
        if self.kind is BCKind.NEUMANN:
            return -(2.0 * delta / self.D) * data
        return 2.0 * data

    @property
    def is_zero_flux(self):
        return self.kind is BCKind.NEUMANN and not callable(self.value) and float(self.value) == 0.0


class Algorithm(enum.Enum):
    MLS = "mls"
    CMLS = "cmls"
    ECMLS = "ecmls"


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm: Algorithm
    basis: object
    weight: object
    kappa: float = 0.0
    stencil_beta: float | None = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def effective_kappa(self):
        return 0.0 if self.algorithm is Algorithm.MLS else float(self.kappa)

    @property
    def stencil_radius(self):
        """Stencil radius in lattice-diagonal units."""
        if self.stencil_beta is not None:
            return float(self.stencil_beta)
        support = self.weight.support
        if not math.isfinite(support):
            raise ValueError("power-of-distance weights need an explicit stencil_beta")
        return float(support)


@dataclass(frozen=True)
class AssembledSystem:
    G: np.ndarray
    W: np.ndarray
    Dvec: np.ndarray
    E: np.ndarray
    f: np.ndarray
    gip_basis: np.ndarray
    gp_basis: np.ndarray
    gamma_gip: float
    row_kind: tuple = field(repr=False)

    @property
    def n_rows(self):
        return self.G.shape[0]

    @property
    def m(self):
        return self.G.shape[1]


@dataclass(frozen=True)
class GhostClosure:
    gp_index: tuple
    stencil_indices: tuple
    coeffs: np.ndarray
    constant: float
    rcond: float
    n_rows: int
    m: int
    regular: bool = True

    def evaluate(self, values):
        """Ghost value from a lattice array indexed ``[j, k]``."""
        vals = np.array([values[j, k] for j, k in self.stencil_indices])
        return float(self.coeffs @ vals + self.constant)


@dataclass(frozen=True)
class GhostGeometry:
    """Projection data of one ghost point."""

    gp_xy: np.ndarray
    gbi: np.ndarray
    delta: float
    gip: np.ndarray


def ghost_geometry(gp, grid, boundary):
    xy = np.array(grid.node_xy(*gp))
    pr = project(xy, boundary)
    return GhostGeometry(gp_xy=xy, gbi=pr.bi, delta=pr.delta, gip=pr.ip)


def collect_stencil(gip, classification, grid, radius_beta):
    """IN and IBN nodes within ``radius_beta`` lattice diagonals of ``gip``."""
    interior = classification.interior
    if math.isinf(radius_beta):
        idx = np.argwhere(interior)
    else:
        reach = radius_beta * grid.h * (1.0 + 1e-12)
        lo_j = max(0, math.floor((gip[0] - reach - grid.origin[0]) / grid.dx))
        hi_j = min(grid.n_cells_x, math.ceil((gip[0] + reach - grid.origin[0]) / grid.dx))
        lo_k = max(0, math.floor((gip[1] - reach - grid.origin[1]) / grid.dy))
        hi_k = min(grid.n_cells_y, math.ceil((gip[1] + reach - grid.origin[1]) / grid.dy))
        if hi_j < lo_j or hi_k < lo_k:
            raise EmptyStencil(f"no interior node within {radius_beta} of {tuple(gip)}")
        jj, kk = np.meshgrid(np.arange(lo_j, hi_j + 1), np.arange(lo_k, hi_k + 1), indexing="ij")
        x = grid.origin[0] + jj * grid.dx
        y = grid.origin[1] + kk * grid.dy
        r_s = np.hypot(x - gip[0], y - gip[1]) / grid.h
        keep = interior[lo_j:hi_j + 1, lo_k:hi_k + 1] & (r_s <= radius_beta * (1.0 + 1e-12))
        idx = np.stack([jj[keep], kk[keep]], axis=-1)
    if len(idx) == 0:
        raise EmptyStencil(f"no interior node within {radius_beta} of {tuple(gip)}")
    return [tuple(p) for p in idx.tolist()]


def assemble(gp, stencil, alg, bc, grid, boundary):
    """Rows, weights and data map of the least-squares problem for one GP."""
    if not stencil:
        raise EmptyStencil("empty stencil")
    geo = ghost_geometry(gp, grid, boundary)
    h = grid.h
    gip = geo.gip
    nodes = np.array([grid.node_xy(j, k) for j, k in stencil])
    S = len(stencil)
    eta = bc.eta

    pts = [nodes]
    E_blocks = [np.eye(S)]
    f_blocks = [np.zeros(S)]
    kinds = ["node"] * S
    if alg.algorithm is Algorithm.ECMLS:
        try:
            bi, delta, _, ip = project_many(nodes, boundary)
        except DegeneratePoint:
            raise DegeneratePoint("a stencil node sits on the circle center; image rows undefined")
        pts.append(ip)
        E_blocks.append(eta * np.eye(S))
        f_blocks.append(bc.gamma(delta, bi))
        kinds += ["ip"] * S
        if bc.kind is BCKind.DIRICHLET:
            pts.append(bi)
            E_blocks.append(np.zeros((S, S)))
            f_blocks.append(bc.data_at(bi))
            kinds += ["bi"] * S
    P = np.concatenate(pts)
    local = (P - gip) / h
    G = eval_basis(alg.basis, local[:, 0], local[:, 1])
    r_s = np.hypot(local[:, 0], local[:, 1])
    W = np.asarray(eval_weight(alg.weight, r_s, cap_zero=isinstance(alg.weight, PowerOfDistance)), dtype=float)
    gip_basis = eval_basis(alg.basis, 0.0, 0.0)
    gl = (geo.gp_xy - gip) / h
    gp_basis = eval_basis(alg.basis, gl[0], gl[1])
    # interior-side constant of the GP<->GIP relation: c_GIP = eta*c_GP + gamma_gip
    gamma_gp = float(bc.gamma([geo.delta], [geo.gbi])[0])
    gamma_gip = -eta * gamma_gp
    return AssembledSystem(
        G=G,
        W=W,
        Dvec=gip_basis - eta * gp_basis,
        E=np.concatenate(E_blocks),
        f=np.concatenate(f_blocks),
        gip_basis=gip_basis,
        gp_basis=gp_basis,
        gamma_gip=gamma_gip,
        row_kind=tuple(kinds),
    )


def moment_matrix(sys, kappa):
    GtW = sys.G.T * sys.W
    return GtW @ sys.G + kappa * np.outer(sys.Dvec, sys.Dvec), GtW


def reciprocal_condition(M):
    """2-norm reciprocal condition number of a symmetric PSD matrix."""
    ev = np.linalg.eigvalsh(M)
    top = np.max(np.abs(ev))
    if top == 0.0:
        return 0.0
    return max(float(ev[0]), 0.0) / top


def solve_closure(sys, alg, bc, gp=None, stencil=(), allow_singular=False):
    """Collapse the fit into GP coefficients over the stencil nodes.

    Raises :class:`RegularityFailure` when the moment matrix has reciprocal
    condition below ``RCOND_MIN``.  With ``allow_singular=True`` the
    minimum-norm least-squares solution is used instead and the closure is
    marked irregular.
    """
    kappa = alg.effective_kappa
    M, GtW = moment_matrix(sys, kappa)
    rcond = reciprocal_condition(M)
    rhs = np.column_stack([GtW @ sys.E, GtW @ sys.f + kappa * sys.gamma_gip * sys.Dvec])
    regular = rcond >= RCOND_MIN
    if regular:
        X = scipy.linalg.solve(M, rhs, assume_a="sym")
    elif allow_singular:
        X = np.linalg.lstsq(M, rhs, rcond=None)[0]
    else:
        raise RegularityFailure(
            f"moment matrix reciprocal condition {rcond:.3e} < {RCOND_MIN:g}", rcond=rcond, gp=gp
        )
    row = sys.gip_basis @ X
    eta = bc.eta
    return GhostClosure(
        gp_index=gp,
        stencil_indices=tuple(stencil),
        coeffs=row[:-1] / eta,
        constant=float((row[-1] - sys.gamma_gip) / eta),
        rcond=rcond,
        n_rows=sys.n_rows,
        m=sys.m,
        regular=regular,
    )


@dataclass
class ClosureSet:
    """Closures for every ghost point plus the list of irregular ones."""

    closures: dict
    failures: dict

    def __len__(self):
        return len(self.closures)

    def gather_arrays(self, grid):
        """CSR arrays (targets, indptr, indices, coeffs, constants) over flat node indices."""
        ny = grid.n_cells_y + 1
        keys = sorted(self.closures)
        targets = np.array([j * ny + k for j, k in keys], dtype=np.intp)
        indptr = np.zeros(len(keys) + 1, dtype=np.intp)
        idx, coef, const = [], [], []
        for g, key in enumerate(keys):
            cl = self.closures[key]
            idx.extend(j * ny + k for j, k in cl.stencil_indices)
            coef.extend(cl.coeffs.tolist())
            const.append(cl.constant)
            indptr[g + 1] = len(idx)
        return (
            targets,
            indptr,
            np.array(idx, dtype=np.intp),
            np.array(coef, dtype=float),
            np.array(const, dtype=float),
        )


def build_all_closures(classification, grid, boundary, alg, bc, allow_singular=True):
    """One closure per GP, in sorted GP order.

    Irregular GPs are recorded in ``failures`` (GP -> rcond).  With
    ``allow_singular`` they still receive a minimum-norm closure so a run can
    proceed; otherwise the first failure is raised.
    """
    closures, failures = {}, {}
    radius = alg.stencil_radius
    for gp in sorted(classification.gp):
        geo = ghost_geometry(gp, grid, boundary)
        stencil = collect_stencil(geo.gip, classification, grid, radius)
        sys = assemble(gp, stencil, alg, bc, grid, boundary)
        cl = solve_closure(sys, alg, bc, gp=gp, stencil=stencil, allow_singular=allow_singular)
        if not cl.regular:
            failures[gp] = cl.rcond
        closures[gp] = cl
    return ClosureSet(closures=closures, failures=failures)

