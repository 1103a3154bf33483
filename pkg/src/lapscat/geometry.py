"""Parametrized boundaries, screens, probe regions and evaluation grids.

Curves are closed, smooth, counterclockwise, discretized at nodes
equispaced in the quadrature parameter tau in [0, 2pi).  An optional
grading map tau -> w(tau) clusters nodes around two parameter values
(screen endpoints) while keeping the node set equispaced in tau, which
is what the trigonometric quadrature rules downstream require.  The
grading is the two-piece sine profile

    w(p + s) = p + s - (beta L / 2pi) sin(2 pi s / L)     on each piece,

which maps each piece [p, p+L] onto itself with w' in [1-beta, 1+beta].

Quadrature weights are (2pi/n) |dq/dtau|; the discrete L2(Gamma) inner
product is sum_j w_j u_j v_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryAmbiguityError, GeometryError, ScreenError

TWO_PI = 2.0 * math.pi


def _lock(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BoundaryGeometry:
    """Discretized closed curve Gamma with quadrature data.

    nodes[j] = q(w(tau_j)), tangents[j] = dq/dtau (grading included),
    normals unit outward, weights[j] = (2pi/n) |dq/dtau|.  ``params``
    are the equispaced quadrature parameters tau_j, ``shape_params``
    the original shape parameter values w(tau_j).
    """

    nodes: np.ndarray        # (n, 2)
    tangents: np.ndarray     # (n, 2), dq/dtau, not normalized
    normals: np.ndarray      # (n, 2), unit outward
    weights: np.ndarray      # (n,)
    closed: bool
    param_range: tuple[float, float]
    params: np.ndarray       # (n,) equispaced tau_j
    shape_params: np.ndarray  # (n,) w(tau_j) in the shape's own parameter
    shape: str = "custom"
    cluster: tuple[float, float, float] | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def jacobians(self) -> np.ndarray:
        return np.linalg.norm(self.tangents, axis=1)

    def perimeter(self) -> float:
        return float(np.sum(self.weights))

    def diameter(self) -> float:
        pts = self.nodes
        return float(
            np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1))
        )


@dataclass(frozen=True)
class ScreenGeometry:
    """Relatively open screen Sigma subset Gamma given by a parameter interval."""

    parent: BoundaryGeometry
    active_mask: np.ndarray   # (n,) bool
    endpoint_params: tuple[float, float]

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active_mask)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active_mask))


@dataclass(frozen=True)
class ProbeRegion:
    """Weighted sample points defining the discrete L2(B) inner product."""

    points: np.ndarray   # (m, 2)
    weights: np.ndarray  # (m,)
    layout: str = "ring"

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class EvaluationGrid:
    """Rectangular lattice of indicator sampling points."""

    points: np.ndarray   # (res*res, 2), row-major over (y, x)
    bounds: tuple[tuple[float, float], tuple[float, float]]
    resolution: int
    xs: np.ndarray = field(repr=False, default=None)
    ys: np.ndarray = field(repr=False, default=None)


# ----------------------------------------------------------------------
# shape catalogue
# ----------------------------------------------------------------------

def _shape_functions(shape: str, params: dict):
    """Return (position, derivative) callables t -> (n,2) arrays."""
    p = dict(params or {})
    if shape == "circle":
        radius = float(p.get("radius", 1.0))
        cx, cy = p.get("center", (0.0, 0.0))
        if radius <= 0:
            raise GeometryError("circle radius must be positive")

        def pos(t):
            return np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t)], axis=-1)

        def der(t):
            return np.stack([-radius * np.sin(t), radius * np.cos(t)], axis=-1)

        return pos, der

    if shape == "ellipse":
        a = float(p.get("a", 2.0))
        b = float(p.get("b", 1.0))
        cx, cy = p.get("center", (0.0, 0.0))
        if a <= 0 or b <= 0:
            raise GeometryError("ellipse semi-axes must be positive")

        def pos(t):
            return np.stack([cx + a * np.cos(t), cy + b * np.sin(t)], axis=-1)

        def der(t):
            return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

        return pos, der

    if shape == "kite":
        # standard non-convex scattering benchmark
        def pos(t):
            return np.stack(
                [np.cos(t) + 0.65 * np.cos(2.0 * t) - 0.65, 1.5 * np.sin(t)], axis=-1
            )

        def der(t):
            return np.stack(
                [-np.sin(t) - 1.3 * np.sin(2.0 * t), 1.5 * np.cos(t)], axis=-1
            )

        return pos, der

    if shape == "peanut":
        scale = float(p.get("scale", 1.0))
        if scale <= 0:
            raise GeometryError("peanut scale must be positive")

        def pos(t):
            r = 0.5 * scale * np.sqrt(3.0 * np.cos(t) ** 2 + 1.0)
            return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

        def der(t):
            r2 = 3.0 * np.cos(t) ** 2 + 1.0
            r = 0.5 * scale * np.sqrt(r2)
            dr = -0.75 * scale * np.sin(2.0 * t) / np.sqrt(r2)
            return np.stack(
                [dr * np.cos(t) - r * np.sin(t), dr * np.sin(t) + r * np.cos(t)],
                axis=-1,
            )

        return pos, der

    raise GeometryError(f"unknown shape {shape!r}")


def _grading_map(cluster: tuple[float, float, float]):
    """Two-point clustering reparametrization; returns (w, w')."""
    a, b, beta = cluster
    a = float(a) % TWO_PI
    b = float(b) % TWO_PI
    if b <= a:
        b += TWO_PI
    if not 0.0 <= beta < 1.0:
        raise GeometryError("cluster strength beta must lie in [0, 1)")
    len1 = b - a
    len2 = TWO_PI - len1
    if len1 <= 0 or len2 <= 0:
        raise GeometryError("cluster endpoints must be distinct modulo 2 pi")

    def w(tau):
        tau = np.asarray(tau, dtype=float)
        s = (tau - a) % TWO_PI
        out = np.empty_like(s)
        first = s <= len1
        s1 = s[first]
        out[first] = s1 - (beta * len1 / TWO_PI) * np.sin(TWO_PI * s1 / len1)
        s2 = s[~first] - len1
        out[~first] = (
            len1 + s2 - (beta * len2 / TWO_PI) * np.sin(TWO_PI * s2 / len2)
        )
        return (a + out) % TWO_PI

    def wprime(tau):
        tau = np.asarray(tau, dtype=float)
        s = (tau - a) % TWO_PI
        out = np.empty_like(s)
        first = s <= len1
        out[first] = 1.0 - beta * np.cos(TWO_PI * s[first] / len1)
        out[~first] = 1.0 - beta * np.cos(TWO_PI * (s[~first] - len1) / len2)
        return out

    return w, wprime


def make_curve(
    shape: str,
    params: dict | None = None,
    n_nodes: int = 128,
    cluster: tuple[float, float, float] | None = None,
) -> BoundaryGeometry:
    """Discretize a built-in closed curve at n_nodes equispaced parameters.

    Parameters
    ----------
    shape : one of "circle", "ellipse", "kite", "peanut"
    params : shape parameters (radius, semi-axes, scale, center)
    n_nodes : even node count >= 8
    cluster : optional (a, b, beta) grading that clusters nodes at the
        shape parameters a and b (used for screen endpoints).
    """
    if n_nodes < 8 or n_nodes % 2 != 0:
        raise GeometryError("n_nodes must be even and >= 8")
    pos, der = _shape_functions(shape, params or {})
    tau = TWO_PI * np.arange(n_nodes) / n_nodes
    if cluster is not None:
        w, wp = _grading_map(cluster)
        t = w(tau)
        dw = wp(tau)
    else:
        t = tau
        dw = np.ones_like(tau)

    nodes = pos(t)
    tangents = der(t) * dw[:, None]
    jac = np.linalg.norm(tangents, axis=1)
    if np.any(jac <= 0) or not np.all(np.isfinite(nodes)):
        raise GeometryError("degenerate parametrization (zero Jacobian)")
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1) / jac[:, None]
    weights = (TWO_PI / n_nodes) * jac

    return BoundaryGeometry(
        nodes=_lock(nodes),
        tangents=_lock(tangents),
        normals=_lock(normals),
        weights=_lock(weights),
        closed=True,
        param_range=(0.0, TWO_PI),
        params=_lock(tau),
        shape_params=_lock(t),
        shape=shape,
        cluster=cluster,
    )


def make_screen(parent: BoundaryGeometry, param_interval) -> ScreenGeometry:
    """Select the screen Sigma = { q(t) : t in [a, b) } on the parent curve.

    The interval is half-open so that, e.g., [0, pi] on an equispaced
    even discretization activates exactly half the nodes.  Sigma must be
    proper (neither empty nor all of Gamma) and carry >= 4 nodes.
    """
    a, b = float(param_interval[0]), float(param_interval[1])
    length = b - a
    if not (0.0 < length < TWO_PI - 1e-12):
        raise ScreenError(
            f"screen interval must be proper and nonempty, got length {length}"
        )
    rel = (parent.shape_params - a) % TWO_PI
    mask = rel < length - 1e-12 * max(1.0, length)
    # the left endpoint node (rel == 0) counts as active under half-open logic
    mask |= np.isclose(rel, 0.0, atol=1e-12) | np.isclose(rel, TWO_PI, atol=1e-12)
    if int(mask.sum()) < 4:
        raise ScreenError(f"screen carries only {int(mask.sum())} nodes, need >= 4")
    if mask.all():
        raise ScreenError("screen interval covers every node; Sigma must be proper")
    mask = np.ascontiguousarray(mask)
    mask.flags.writeable = False
    return ScreenGeometry(parent=parent, active_mask=mask, endpoint_params=(a, b))


def make_probe(center, radius: float, n_points: int, layout: str = "ring") -> ProbeRegion:
    """Build the measurement region B as weighted sample points."""
    if n_points < 8:
        raise GeometryError("probe needs at least 8 points")
    if radius <= 0:
        raise GeometryError("probe radius must be positive")
    cx, cy = float(center[0]), float(center[1])
    if layout == "ring":
        th = TWO_PI * np.arange(n_points) / n_points
        pts = np.stack([cx + radius * np.cos(th), cy + radius * np.sin(th)], axis=1)
        wts = np.full(n_points, TWO_PI * radius / n_points)
    elif layout == "disk_grid":
        per_axis = int(math.ceil(math.sqrt(n_points)))
        cell = 2.0 * radius / per_axis
        coords = -radius + cell * (np.arange(per_axis) + 0.5)
        gx, gy = np.meshgrid(coords, coords, indexing="xy")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        inside = np.linalg.norm(pts, axis=1) <= radius
        pts = pts[inside] + np.array([cx, cy])
        wts = np.full(pts.shape[0], cell * cell)
        if pts.shape[0] < 8:
            raise GeometryError("disk grid too coarse; fewer than 8 interior cells")
    else:
        raise GeometryError(f"unknown probe layout {layout!r}")
    return ProbeRegion(points=_lock(pts), weights=_lock(wts), layout=layout)


def make_grid(bounds, resolution: int) -> EvaluationGrid:
    """Rectangular evaluation lattice, row-major over (y, x)."""
    if resolution < 2:
        raise GeometryError("grid resolution must be >= 2")
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise GeometryError("grid bounds must be non-degenerate")
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return EvaluationGrid(
        points=_lock(pts),
        bounds=((x0, x1), (y0, y1)),
        resolution=resolution,
        xs=_lock(xs),
        ys=_lock(ys),
    )


# ----------------------------------------------------------------------
# predicates
# ----------------------------------------------------------------------

def winding_fraction(geom: BoundaryGeometry, points: np.ndarray) -> np.ndarray:
    """Winding number of the node polygon around each point (vectorized)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = geom.nodes[None, :, :] - pts[:, None, :]           # (m, n, 2)
    v_next = np.roll(v, -1, axis=1)
    cross = v[:, :, 0] * v_next[:, :, 1] - v[:, :, 1] * v_next[:, :, 0]
    dot = np.einsum("mnk,mnk->mn", v, v_next)
    return np.sum(np.arctan2(cross, dot), axis=1) / TWO_PI


def contains(geom: BoundaryGeometry, x) -> bool:
    """Winding-number containment test for a single point."""
    x_arr = np.asarray(x, dtype=float)
    dist = np.min(np.linalg.norm(geom.nodes - x_arr[None, :], axis=1))
    if dist < 1e-9:
        raise BoundaryAmbiguityError("query point lies (numerically) on the boundary")
    frac = float(winding_fraction(geom, x_arr[None, :])[0])
    if 0.25 < abs(frac) < 0.75:
        raise BoundaryAmbiguityError(
            f"winding fraction {frac:.3f} ambiguous; point too close to the boundary"
        )
    return abs(frac) > 0.5


def contains_many(geom: BoundaryGeometry, points: np.ndarray) -> np.ndarray:
    """Vectorized winding-number test (no ambiguity guard; used on grids)."""
    return np.abs(winding_fraction(geom, points)) > 0.5


def distance_to_boundary(geom: BoundaryGeometry, points: np.ndarray) -> np.ndarray:
    """Distance to the node set (dense-node approximation of dist(x, Gamma))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - geom.nodes[None, :, :], axis=-1)
    return d.min(axis=1)


def validate_separation(
    geom: BoundaryGeometry, probe: ProbeRegion, margin: float
) -> bool:
    """True iff every probe point keeps distance > margin from Gamma and
    none lies inside Omega."""
    if margin <= 0:
        raise GeometryError("separation margin must be positive")
    dists = distance_to_boundary(geom, probe.points)
    if np.min(dists) <= margin:
        return False
    return not bool(np.any(contains_many(geom, probe.points)))


def validate_grid_covers(geom: BoundaryGeometry, grid: EvaluationGrid) -> bool:
    """Grid bounding box must strictly contain the curve."""
    (x0, x1), (y0, y1) = grid.bounds
    n = geom.nodes
    return bool(
        n[:, 0].min() > x0 and n[:, 0].max() < x1
        and n[:, 1].min() > y0 and n[:, 1].max() < y1
    )
