"""Range-test reconstruction from the data operator's eigensystem.

A sampling point x is classified through the Picard series of its test
vector g_x (the fundamental solution centered at x, sampled on the
probe): the truncated sum S(x) = sum_k |<g_x, v_k>|^2 / |mu_k| stays
moderate when x lies inside the scatterer and blows up outside.  The
reported indicator is W = 1/S, so inside reads as large values.  The
inf-criterion variant minimizes |<u, F u>| over the affine slice
<u, g> = 1 of a leading eigenspace; for definite operators the two
agree through the Lagrange closed form.

Open screens are probed with arc-integrated test vectors on a
hypothesized carrier curve; sweeping the arc along the curve separates
arcs on the screen from arcs on its complement.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .data_operator import DataOperator
from .errors import (
    ConstraintError,
    DegenerateOperatorError,
    DomainError,
    SegmentationError,
)
from .geometry import (
    BoundaryGeometry,
    EvaluationGrid,
    ProbeRegion,
    _shape_functions,
    contains_many,
    distance_to_boundary,
)
from .kernels import SpectralParam, fundamental_solution

DEFAULT_TRUNCATION_FLOOR = 1e-8
DEFAULT_THRESHOLD_LEVEL = 0.2


@dataclass(frozen=True)
class TestVector:
    """Probe samples of a test field, in weighted probe coordinates."""

    __test__ = False  # not a pytest collection target

    values: np.ndarray
    lam: SpectralParam
    source: tuple | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DomainError("test vector has non-finite entries")
        if np.linalg.norm(v) == 0.0:
            raise DomainError("test vector has zero norm")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class TestArc:
    """Arc on a hypothesized carrier curve, for screen test vectors."""

    __test__ = False  # not a pytest collection target

    shape: str
    shape_params: dict | None
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        a, b = self.interval
        if not b > a:
            raise DomainError("arc interval must have positive length")


@dataclass
class IndicatorGrid:
    """Indicator values over an evaluation grid (finite by construction)."""

    grid: EvaluationGrid
    picard_values: np.ndarray
    inf_values: np.ndarray | None
    truncation_k: int
    threshold: float | None = None

    def __post_init__(self) -> None:
        pv = np.asarray(self.picard_values, dtype=float)
        if np.any(pv < 0) or not np.all(np.isfinite(pv)):
            raise DomainError("picard values must be finite and non-negative")


@dataclass(frozen=True)
class SegmentationResult:
    mask: np.ndarray
    threshold: float
    rule: str
    jaccard: float | None = None
    accuracy: float | None = None
    n_scored: int | None = None


def make_test_vector(
    probe: ProbeRegion, x, lam: SpectralParam, dim: int = 2
) -> TestVector:
    """Weighted probe samples of the point test field centered at x."""
    x = np.asarray(x, dtype=float)
    vals = fundamental_solution(dim, lam, x[None, :], probe.points)
    weighted = np.sqrt(probe.weights) * vals
    return TestVector(values=weighted, lam=lam, source=tuple(x.tolist()))


def make_screen_test_vector(
    probe: ProbeRegion,
    arc: TestArc,
    lam: SpectralParam,
    n_quad: int = 256,
    dim: int = 2,
) -> TestVector:
    """Arc-integrated test vector: quadrature of the point field over the arc.

    Gauss-Legendre quadrature with n_quad nodes on the arc's parameter
    interval, pulled forward through the carrier curve.
    """
    if n_quad < 2:
        raise DomainError("n_quad must be at least 2")
    pos, der = _shape_functions(arc.shape, arc.shape_params)
    a, b = arc.interval
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(n_quad)
    t = 0.5 * (b - a) * gl_nodes + 0.5 * (b + a)
    w = 0.5 * (b - a) * gl_weights
    pts = pos(t)
    jac = np.linalg.norm(der(t), axis=1)
    vals = fundamental_solution(dim, lam, pts[:, None, :], probe.points[None, :, :])
    integrated = (w * jac) @ vals
    weighted = np.sqrt(probe.weights) * integrated
    return TestVector(
        values=weighted, lam=lam,
        source=(arc.shape, float(a), float(b)),
    )


def _retained(op: DataOperator, truncation_floor: float) -> int:
    if not 0.0 < truncation_floor < 1.0:
        raise DomainError("truncation_floor must lie in (0, 1)")
    mags = np.abs(op.eigenvalues)
    if mags.size == 0 or mags[0] == 0.0:
        raise DegenerateOperatorError("data operator has empty truncated spectrum")
    return int(np.count_nonzero(mags >= truncation_floor * mags[0]))


def picard_indicator(
    op: DataOperator,
    g: TestVector,
    truncation_floor: float = DEFAULT_TRUNCATION_FLOOR,
) -> float:
    """Reciprocal truncated Picard sum; +inf when g misses the retained span.

    Large values indicate that the test field is (numerically) in the
    range of the propagated operator, i.e. the source point is inside.
    """
    k = _retained(op, truncation_floor)
    coeffs = op.eigenvectors[:, :k].T @ g.values
    s = float(np.sum(coeffs**2 / np.abs(op.eigenvalues[:k])))
    if s == 0.0:
        return math.inf
    return 1.0 / s


def picard_sum_terms(
    op: DataOperator,
    g: TestVector,
    truncation_floor: float = DEFAULT_TRUNCATION_FLOOR,
) -> np.ndarray:
    """Individual terms |<g, v_k>|^2 / |mu_k| of the truncated sum."""
    k = _retained(op, truncation_floor)
    coeffs = op.eigenvectors[:, :k].T @ g.values
    return coeffs**2 / np.abs(op.eigenvalues[:k])


def inf_indicator(op: DataOperator, g: TestVector, subspace_k: int | None = None) -> float:
    """Exact infimum of |<u, F u>| over <u, g> = 1 in a leading eigenspace.

    The constraint slice is an affine subspace of the span of the first
    subspace_k eigenvectors; the quadratic form restricted to the slice
    is diagonalized exactly, so no iterative search is needed.  An
    indefinite restriction (or a kernel direction with leverage) makes
    the infimum 0.
    """
    if subspace_k is None:
        subspace_k = _retained(op, DEFAULT_TRUNCATION_FLOOR)
    if not 1 <= subspace_k <= op.eigenvalues.size:
        raise DomainError(f"subspace_k {subspace_k} out of range")
    mu = op.eigenvalues[:subspace_k]
    gamma = op.eigenvectors[:, :subspace_k].T @ g.values
    gnorm2 = float(gamma @ gamma)
    if gnorm2 == 0.0 or not np.isfinite(gnorm2):
        raise ConstraintError("test vector orthogonal to the chosen subspace")

    # coordinates c in the eigenbasis: minimize |sum mu_k c_k^2| on gamma.c = 1
    u0 = gamma / gnorm2
    if subspace_k == 1:
        return abs(float(mu[0] * u0[0] * u0[0]))

    # orthonormal basis of the constraint plane's direction space
    q, _ = np.linalg.qr(
        np.concatenate([gamma[:, None], np.eye(subspace_k)], axis=1)
    )
    z = q[:, 1:subspace_k]
    qtilde = z.T @ (mu[:, None] * z)
    b = z.T @ (mu * u0)
    c0 = float(u0 @ (mu * u0))
    d, u = np.linalg.eigh(0.5 * (qtilde + qtilde.T))
    btil = u.T @ b
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    tol = 1e-13 * max(scale, 1.0)

    pos = d > tol
    neg = d < -tol
    null = ~pos & ~neg
    if np.any(np.abs(btil[null]) > 1e-13 * max(np.linalg.norm(b), 1.0)):
        return 0.0  # flat direction with linear leverage: q sweeps all reals
    if np.any(pos) and np.any(neg):
        return 0.0  # indefinite restriction: range is all of R
    active = pos | neg
    extremum = c0 - float(np.sum(btil[active] ** 2 / d[active]))
    if np.any(pos):
        return max(extremum, 0.0)  # range [extremum, inf)
    if np.any(neg):
        return max(-extremum, 0.0)  # range (-inf, extremum]
    return abs(c0)  # form vanishes on the slice directions


def sweep(
    op: DataOperator,
    probe: ProbeRegion,
    grid: EvaluationGrid,
    mode: str = "picard",
    lam: SpectralParam | None = None,
    dim: int = 2,
    truncation_floor: float = DEFAULT_TRUNCATION_FLOOR,
    subspace_k: int | None = None,
) -> IndicatorGrid:
    """Indicator values over all grid points (vectorized over the grid).

    Infinite Picard sentinels (test vector orthogonal to the retained
    span) are reported as the maximum finite value on the grid, keeping
    the field finite for segmentation and export.
    """
    if mode not in ("picard", "inf", "both"):
        raise DomainError(f"unknown sweep mode {mode!r}")
    if lam is None:
        lam = op.lam
    k = _retained(op, truncation_floor)
    vals = fundamental_solution(
        dim, lam, grid.points[:, None, :], probe.points[None, :, :]
    )
    ghat = vals * np.sqrt(probe.weights)[None, :]        # (n_grid, n_probe)
    coeffs = ghat @ op.eigenvectors[:, :k]               # (n_grid, k)
    sums = (coeffs**2 / np.abs(op.eigenvalues[:k])[None, :]).sum(axis=1)

    with np.errstate(divide="ignore"):
        picard = np.where(sums > 0.0, 1.0 / sums, np.inf)
    finite = np.isfinite(picard)
    if not np.all(finite):
        cap = float(picard[finite].max()) if np.any(finite) else 1.0
        picard = np.where(finite, picard, cap)

    inf_vals = None
    if mode in ("inf", "both"):
        kk = subspace_k if subspace_k is not None else k
        mu = op.eigenvalues[:kk]
        same_sign = np.all(mu > 0) or np.all(mu < 0)
        if same_sign:
            s2 = (coeffs[:, :kk] ** 2 / np.abs(mu)[None, :]).sum(axis=1)
            with np.errstate(divide="ignore"):
                inf_vals = np.where(s2 > 0.0, 1.0 / s2, np.inf)
            fin = np.isfinite(inf_vals)
            cap = float(inf_vals[fin].max()) if np.any(fin) else 1.0
            inf_vals = np.where(fin, inf_vals, cap)
        else:
            inf_vals = np.empty(grid.points.shape[0])
            for i in range(grid.points.shape[0]):
                tv = TestVector(values=ghat[i], lam=lam)
                try:
                    inf_vals[i] = inf_indicator(op, tv, kk)
                except ConstraintError:
                    inf_vals[i] = 0.0

    return IndicatorGrid(
        grid=grid, picard_values=picard, inf_values=inf_vals, truncation_k=k
    )


def _otsu_threshold(values: np.ndarray) -> float:
    """Otsu's between-class variance maximizer, on the log-indicator.

    Range-test indicators span many decades (the Picard sum diverges
    geometrically outside), so the bimodal structure lives on the log
    scale; the returned threshold is mapped back to indicator units.
    """
    vmax = float(values.max())
    logs = np.log10(np.maximum(values, vmax * 1e-15))
    lo, hi = float(logs.min()), float(logs.max())
    hist, edges = np.histogram(logs, bins=256, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = hist.sum()
    w0 = np.cumsum(hist)
    w1 = total - w0
    m0 = np.cumsum(hist * centers)
    mtot = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (mtot - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between = np.where((w0 > 0) & (w1 > 0), between, -1.0)
    return float(10.0 ** centers[int(np.argmax(between))])


def segment(
    igrid: IndicatorGrid,
    geom: BoundaryGeometry | None = None,
    rule: str = "fixed_threshold",
    level: float = DEFAULT_THRESHOLD_LEVEL,
    margin_band: float | None = None,
    use: str = "picard",
) -> SegmentationResult:
    """Threshold the indicator field; score against geometry if given.

    fixed_threshold uses level * max(values); otsu picks the histogram
    split.  Scoring (Jaccard index and classification accuracy against
    the containment oracle) excludes points within margin_band of the
    boundary (default 0.1 * diam).
    """
    values = igrid.picard_values if use == "picard" else igrid.inf_values
    if values is None:
        raise DomainError(f"indicator values for {use!r} not computed")
    vmax, vmin = float(values.max()), float(values.min())
    if vmax == vmin:
        raise SegmentationError("constant indicator field cannot be segmented")
    if rule == "fixed_threshold":
        if not 0.0 < level < 1.0:
            raise DomainError("threshold level must lie in (0,1)")
        threshold = level * vmax
    elif rule == "otsu":
        threshold = _otsu_threshold(values)
    else:
        raise DomainError(f"unknown segmentation rule {rule!r}")
    mask = values >= threshold
    igrid.threshold = threshold

    if geom is None:
        return SegmentationResult(mask=mask, threshold=threshold, rule=rule)

    if margin_band is None:
        margin_band = 0.1 * geom.diameter()
    pts = igrid.grid.points
    oracle = contains_many(geom, pts)
    dist = distance_to_boundary(geom, pts)
    scored = dist > margin_band
    n_scored = int(np.count_nonzero(scored))
    if n_scored == 0:
        raise SegmentationError("margin band excludes every grid point")
    m, o = mask[scored], oracle[scored]
    inter = np.count_nonzero(m & o)
    union = np.count_nonzero(m | o)
    jaccard = 1.0 if union == 0 else inter / union
    accuracy = float(np.count_nonzero(m == o)) / n_scored
    return SegmentationResult(
        mask=mask, threshold=threshold, rule=rule,
        jaccard=float(jaccard), accuracy=accuracy, n_scored=n_scored,
    )


# ----------------------------------------------------------------------
# artifact export
# ----------------------------------------------------------------------

def write_indicator_csv(igrid: IndicatorGrid, path: str) -> None:
    """Per-point CSV: x, y, picard indicator, optional inf indicator."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["x", "y", "picard"]
        if igrid.inf_values is not None:
            header.append("inf")
        writer.writerow(header)
        for i, (x, y) in enumerate(igrid.grid.points):
            row = [repr(float(x)), repr(float(y)), repr(float(igrid.picard_values[i]))]
            if igrid.inf_values is not None:
                row.append(repr(float(igrid.inf_values[i])))
            writer.writerow(row)


def write_indicator_pgm(igrid: IndicatorGrid, path: str, use: str = "picard") -> None:
    """Plain-text PGM (P2) heatmap, top row = maximal y."""
    values = igrid.picard_values if use == "picard" else igrid.inf_values
    if values is None:
        raise DomainError(f"indicator values for {use!r} not computed")
    res = igrid.grid.resolution
    img = values.reshape(res, res)  # rows indexed by y, columns by x
    vmin, vmax = float(img.min()), float(img.max())
    span = vmax - vmin
    if span == 0.0:
        levels = np.zeros_like(img, dtype=int)
    else:
        levels = np.rint(255.0 * (img - vmin) / span).astype(int)
    lines = ["P2", f"{res} {res}", "255"]
    for row in levels[::-1]:
        lines.append(" ".join(str(int(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_metrics_json(
    path: str,
    result: SegmentationResult | None,
    igrid: IndicatorGrid,
    op: DataOperator | None = None,
    extra: dict | None = None,
) -> None:
    """JSON metrics report (threshold, scores, truncation, spectrum)."""
    payload: dict = {
        "truncation_k": igrid.truncation_k,
        "indicator_max": float(np.max(igrid.picard_values)),
        "indicator_min": float(np.min(igrid.picard_values)),
    }
    if result is not None:
        payload["threshold"] = result.threshold
        payload["rule"] = result.rule
        payload["jaccard"] = result.jaccard
        payload["accuracy"] = result.accuracy
        payload["n_scored"] = result.n_scored
    if op is not None:
        payload["eigenvalues"] = [float(v) for v in op.eigenvalues]
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
