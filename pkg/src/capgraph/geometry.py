"""Truncated half-space lattices and the angle-adapted ellipsoidal regions.

The computational domain is an axis-aligned box [0, L1] x [-Lp, Lp]^(dim-1)
discretized with uniform spacing h.  Nodes on the wall {x1 = 0} carry the
contact-angle boundary condition, the remaining box faces carry Dirichlet
data, and corners where the wall meets another face are assigned Dirichlet
(the node would otherwise be over-determined).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .errors import BadDimension, EmptyRegion, NonconformingExtent

if TYPE_CHECKING:
    from .capillary import CapillaryAngle

_CONFORM_TOL = 1e-9


class NodeClass(IntEnum):
    INTERIOR = 0
    CAPILLARY_BOUNDARY = 1
    DIRICHLET_BOUNDARY = 2


class RegionKind(Enum):
    """Outer region uses semiaxis r, inner region (1 + |cos(theta)|)/2 * r."""

    OUTER = "outer"
    INNER = "inner"


def _conforming_count(extent: float, h: float, name: str) -> int:
    m = extent / h
    m_round = round(m)
    if m_round < 1 or abs(m - m_round) > _CONFORM_TOL * max(1.0, m):
        raise NonconformingExtent(
            f"{name}={extent} is not a positive integer multiple of h={h}"
        )
    return int(m_round)


@dataclass(frozen=True, eq=False)
class HalfSpaceGrid:
    """Uniform lattice on [0, L1] x [-Lp, Lp]^(dim-1) with node classification.

    All arrays are read-only after construction; instances are safe to share.
    """

    dim: int
    h: float
    L1: float
    Lp: float | None
    shape: tuple[int, ...]
    nodes: np.ndarray          # (n_nodes, dim) coordinates
    classes: np.ndarray        # (n_nodes,) NodeClass values

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.classes == NodeClass.INTERIOR)

    @cached_property
    def capillary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.classes == NodeClass.CAPILLARY_BOUNDARY)

    @cached_property
    def dirichlet_indices(self) -> np.ndarray:
        return np.flatnonzero(self.classes == NodeClass.DIRICHLET_BOUNDARY)

    @cached_property
    def free_indices(self) -> np.ndarray:
        """Interior plus capillary nodes, the unknowns of a solve."""
        return np.flatnonzero(self.classes != NodeClass.DIRICHLET_BOUNDARY)

    @cached_property
    def cell_corners(self) -> np.ndarray:
        """Flat node indices of each cell's corners.

        1D: (n_cells, 2) columns (left, right).
        2D: (n_cells, 4) columns (c00, c10, c01, c11); first index along x1.
        """
        if self.dim == 1:
            i = np.arange(self.shape[0] - 1)
            out = np.stack([i, i + 1], axis=1)
        else:
            n1, n2 = self.shape
            i1, i2 = np.meshgrid(np.arange(n1 - 1), np.arange(n2 - 1), indexing="ij")
            c00 = (i1 * n2 + i2).ravel()
            out = np.stack([c00, c00 + n2, c00 + 1, c00 + n2 + 1], axis=1)
        out.flags.writeable = False
        return out

    @cached_property
    def node_weights(self) -> np.ndarray:
        """Control-volume weight per node: h^dim * (adjacent cells) / 2^dim."""
        counts = np.ones(self.shape)
        for axis in range(self.dim):
            edge = np.ones(self.shape[axis])
            edge[1:-1] = 2.0
            shp = [1] * self.dim
            shp[axis] = self.shape[axis]
            counts = counts * edge.reshape(shp)
        w = counts.ravel() * (self.h / 2.0) ** self.dim
        w.flags.writeable = False
        return w

    def axis_coords(self, axis: int) -> np.ndarray:
        if axis == 0:
            return np.linspace(0.0, self.L1, self.shape[0])
        return np.linspace(-self.Lp, self.Lp, self.shape[1])

    def reshape(self, values: np.ndarray) -> np.ndarray:
        """View flat nodal values on the (n1,) or (n1, n2) lattice."""
        return np.asarray(values).reshape(self.shape)


def build_grid(dim: int, h: float, L1: float, Lp: float | None = None) -> HalfSpaceGrid:
    """Build a classified half-space lattice.

    L1 and Lp must be positive integer multiples of h; Lp is required for
    dim == 2 and ignored for dim == 1.
    """
    if dim not in (1, 2):
        raise BadDimension(f"dim must be 1 or 2, got {dim}")
    if not (np.isfinite(h) and h > 0.0):
        raise NonconformingExtent(f"mesh width h must be positive, got {h}")

    m1 = _conforming_count(L1, h, "L1")
    if dim == 1:
        shape: tuple[int, ...] = (m1 + 1,)
        x1 = np.linspace(0.0, L1, m1 + 1)
        nodes = x1[:, None]
        classes = np.full(m1 + 1, NodeClass.INTERIOR, dtype=np.int8)
        classes[0] = NodeClass.CAPILLARY_BOUNDARY
        classes[-1] = NodeClass.DIRICHLET_BOUNDARY
        Lp_val = None
    else:
        if Lp is None:
            raise NonconformingExtent("Lp is required for dim == 2")
        mp = _conforming_count(Lp, h, "Lp")
        n1, n2 = m1 + 1, 2 * mp + 1
        shape = (n1, n2)
        x1 = np.linspace(0.0, L1, n1)
        x2 = np.linspace(-Lp, Lp, n2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        nodes = np.stack([X1.ravel(), X2.ravel()], axis=1)
        cls = np.full((n1, n2), NodeClass.INTERIOR, dtype=np.int8)
        cls[0, :] = NodeClass.CAPILLARY_BOUNDARY
        # Dirichlet wins at corners where the wall meets another face.
        cls[-1, :] = NodeClass.DIRICHLET_BOUNDARY
        cls[:, 0] = NodeClass.DIRICHLET_BOUNDARY
        cls[:, -1] = NodeClass.DIRICHLET_BOUNDARY
        classes = cls.ravel()
        Lp_val = Lp

    nodes.flags.writeable = False
    classes.flags.writeable = False
    return HalfSpaceGrid(dim=dim, h=h, L1=L1, Lp=Lp_val, shape=shape,
                         nodes=nodes, classes=classes)


@dataclass(frozen=True)
class EllipsoidRegion:
    """Angle-adapted ellipsoidal truncation of the half-space.

    Membership set: {x1 >= 0, (x1 - |cos(theta)| r)^2 + sin^2(theta) |x' - center|^2 < rho^2}
    with rho = r for OUTER and rho = (1 + |cos(theta)|) r / 2 for INNER.
    The tangential center defaults to the origin.
    """

    r: float
    theta: "CapillaryAngle"
    kind: RegionKind = RegionKind.OUTER
    center: tuple[float, ...] = ()

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0.0):
            raise ValueError(f"region radius must be positive, got {self.r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def semiaxis(self) -> float:
        if self.kind is RegionKind.INNER:
            return 0.5 * (1.0 + abs(self.theta.cos_t)) * self.r
        return self.r

    @property
    def axial_center(self) -> float:
        return abs(self.theta.cos_t) * self.r

    def quadratic_value(self, points: np.ndarray) -> np.ndarray:
        """(x1 - |cos| r)^2 + sin^2 |x' - center|^2 for each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val = (pts[:, 0] - self.axial_center) ** 2
        if pts.shape[1] > 1:
            prime = pts[:, 1:]
            if self.center:
                prime = prime - np.asarray(self.center)
            val = val + self.theta.sin_t ** 2 * np.sum(prime ** 2, axis=1)
        return val


def in_region(p, region: EllipsoidRegion) -> bool | np.ndarray:
    """Strict membership test; accepts one point or an (N, dim) batch.

    The wall {x1 = 0} counts as inside when the strict quadratic inequality
    holds, so the region is relatively open in the closed half-space.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts2 = np.atleast_2d(pts)
    ok = (pts2[:, 0] >= 0.0) & (region.quadratic_value(pts2) < region.semiaxis ** 2)
    return bool(ok[0]) if single else ok


def _distance_to_ellipsoid(y: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Euclidean distance from exterior points y (centered coords) to the
    ellipsoid sum((y_i/axes_i)^2) = 1, by bisection on the projection
    parameter.  Points inside get distance 0.
    """
    y = np.atleast_2d(y)
    a2 = axes ** 2
    inside = np.sum((y / axes) ** 2, axis=1) <= 1.0
    d = np.zeros(y.shape[0])
    ext = ~inside
    if not np.any(ext):
        return d
    ye = y[ext]

    def phi(t):
        return np.sum((axes * ye / (t[:, None] + a2)) ** 2, axis=1)

    lo = np.zeros(ye.shape[0])
    hi = np.sqrt(y.shape[1]) * np.max(np.abs(ye) * axes, axis=1) + np.max(a2)
    for _ in range(64):
        grow = phi(hi) > 1.0
        if not np.any(grow):
            break
        hi[grow] *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        high = phi(mid) > 1.0
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    t = 0.5 * (lo + hi)
    proj = a2 * ye / (t[:, None] + a2)
    d[ext] = np.linalg.norm(ye - proj, axis=1)
    return d


def inner_node_set(grid: HalfSpaceGrid, region: EllipsoidRegion) -> np.ndarray:
    """Sorted indices of grid nodes inside the region or within h/2 of its
    closure.  Raises EmptyRegion when no node qualifies."""
    pts = grid.nodes
    member = in_region(pts, region)
    rho = region.semiaxis
    # Centered, metric-scaled coordinates: ellipsoid semiaxes (rho, rho/sin).
    y = pts.copy()
    y[:, 0] -= region.axial_center
    if grid.dim > 1 and region.center:
        y[:, 1:] -= np.asarray(region.center)
    axes = np.full(grid.dim, rho)
    if grid.dim > 1:
        axes[1:] = rho / region.theta.sin_t
    # Grid nodes have x1 >= 0, so the nearest ellipsoid point is feasible and
    # distance to the clipped closure equals distance to the full ellipsoid.
    dist = _distance_to_ellipsoid(y, axes)
    keep = member | (dist <= 0.5 * grid.h + 1e-12)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise EmptyRegion(
            f"no grid node inside or within h/2 of region r={region.r}, kind={region.kind}"
        )
    return idx
