"""Cartesian lattice, circular immersed boundary, node classification and projections.

Arrays over the lattice are indexed ``[j, k]`` with ``j`` along x and ``k``
along y, so node ``(j, k)`` sits at ``origin + (j*dx, k*dy)``.
"""

from dataclasses import dataclass, field
import enum
import functools
import math

import numpy as np

from .errors import BoundaryExceedsGrid, DegeneratePoint

TIE_TOL = 1e-12


@dataclass(frozen=True)
class CircleBoundary:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class GridSpec:
    """Lattice of ``(n_cells_x + 1) x (n_cells_y + 1)`` nodes."""

    n_cells_x: int
    n_cells_y: int
    dx: float
    dy: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.n_cells_x < 1 or self.n_cells_y < 1:
            raise ValueError("cell counts must be positive")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("dx and dy must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def around(cls, boundary, n_cells, dx, dy=None, pad=1):
        """Lattice whose central ``n_cells`` intervals span the circle's box.

        The center node coincides with ``boundary.center``; ``pad`` extra node
        rings on every side hold the ghost points of nodes lying on the circle.
        """
        dy = dx if dy is None else dy
        if n_cells % 2:
            raise ValueError("n_cells must be even so a node sits on the center")
        half = n_cells // 2 + pad
        cx, cy = boundary.center
        return cls(2 * half, 2 * half, dx, dy, (cx - half * dx, cy - half * dy))

    @property
    def shape(self):
        return (self.n_cells_x + 1, self.n_cells_y + 1)

    @property
    def h(self):
        """Lattice diagonal ``sqrt(dx**2 + dy**2)``."""
        return math.hypot(self.dx, self.dy)

    def node_xy(self, j, k):
        return (self.origin[0] + j * self.dx, self.origin[1] + k * self.dy)

    def coordinates(self):
        """Broadcastable ``(X, Y)`` node coordinate arrays."""
        x = self.origin[0] + np.arange(self.n_cells_x + 1) * self.dx
        y = self.origin[1] + np.arange(self.n_cells_y + 1) * self.dy
        return x[:, None], y[None, :]

    def nearest_node(self, point):
        """Index of the node closest to ``point`` and its offset in cell units."""
        fj = (point[0] - self.origin[0]) / self.dx
        fk = (point[1] - self.origin[1]) / self.dy
        j, k = round(fj), round(fk)
        return (j, k), max(abs(fj - j), abs(fk - k))

    def center_index(self, boundary):
        (j, k), off = self.nearest_node(boundary.center)
        if off > TIE_TOL or not (0 <= j <= self.n_cells_x and 0 <= k <= self.n_cells_y):
            raise ValueError("circle center does not coincide with a lattice node")
        return j, k


class NodeClass(enum.IntEnum):
    IN = 0
    IBN = 1
    GP = 2
    EN = 3


@dataclass(frozen=True)
class NodeClassification:
    labels: np.ndarray = field(repr=False)
    gp: tuple
    ibn: tuple

    @functools.cached_property
    def interior(self):
        return self.labels <= NodeClass.IBN

    def of(self, j, k):
        return NodeClass(int(self.labels[j, k]))

    def count(self, cls):
        return int(np.count_nonzero(self.labels == cls))


_ARMS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def interior_mask(grid, boundary):
    """Nodes strictly inside the circle, with on-circle ties counted as interior."""
    x, y = grid.coordinates()
    cx, cy = boundary.center
    dist = np.hypot(x - cx, y - cy)
    return dist <= boundary.radius * (1.0 + TIE_TOL)


def _any_neighbor(mask):
    out = np.zeros_like(mask)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def classify_nodes(grid, boundary):
    """Label every node IN, IBN, GP or EN for the 5-point stencil."""
    inside = interior_mask(grid, boundary)
    edge = np.zeros_like(inside)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    if np.any(inside & edge):
        raise BoundaryExceedsGrid(
            "interior nodes reach the lattice edge; the circle plus one ghost ring does not fit"
        )
    outside = ~inside
    ibn = inside & _any_neighbor(outside)
    gp = outside & _any_neighbor(ibn)
    labels = np.full(grid.shape, NodeClass.EN, dtype=np.int8)
    labels[inside] = NodeClass.IN
    labels[ibn] = NodeClass.IBN
    labels[gp] = NodeClass.GP
    as_tuples = lambda m: tuple(map(tuple, np.argwhere(m).tolist()))  # noqa: E731
    return NodeClassification(labels=labels, gp=as_tuples(gp), ibn=as_tuples(ibn))


@dataclass(frozen=True)
class ProjectionResult:
    bi: np.ndarray
    delta: float
    normal: np.ndarray
    ip: np.ndarray


def project(point, boundary):
    """Closest point on the circle, distance to it, outward normal and mirror image."""
    p = np.asarray(point, dtype=float)
    c = np.asarray(boundary.center)
    v = p - c
    dist = math.hypot(v[0], v[1])
    if dist < TIE_TOL * boundary.radius:
        raise DegeneratePoint(f"projection undefined at the circle center {tuple(c)}")
    normal = v / dist
    bi = c + boundary.radius * normal
    return ProjectionResult(bi=bi, delta=abs(dist - boundary.radius), normal=normal, ip=2.0 * bi - p)


def project_many(points, boundary):
    """Vectorized :func:`project` over an ``(n, 2)`` array.

    Returns ``(bi, delta, normal, ip)`` arrays.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = p - np.asarray(boundary.center)
    dist = np.hypot(v[:, 0], v[:, 1])
    if np.any(dist < TIE_TOL * boundary.radius):
        raise DegeneratePoint("projection undefined at the circle center")
    normal = v / dist[:, None]
    bi = np.asarray(boundary.center) + boundary.radius * normal
    return bi, np.abs(dist - boundary.radius), normal, 2.0 * bi - p


def normalized_radius(a, b, grid):
    """Distance between ``a`` and ``b`` in units of the lattice diagonal."""
    return math.hypot(a[0] - b[0], a[1] - b[1]) / grid.h
