"""Near-field data operator linking probe measurements to the boundary.

The scattered-field data operator factorizes as F = G M^{-1} G^T where
G carries a boundary density to field values on the probe region and M
is the boundary operator of the active condition.  In weighted nodal
coordinates G becomes W_B^{1/2} A W_Gamma^{1/2} with A the plain kernel
sample matrix, so F is symmetric and its nonzero spectrum has the sign
of M (congruence).  Dirichlet and delta-type conditions radiate through
the single-layer kernel, Neumann and delta'-type through the
double-layer kernel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .boundary_ops import BoundaryCondition, BoundaryOperator, assemble_M, invert_M
from .errors import DegenerateOperatorError, DomainError
from .geometry import BoundaryGeometry, ProbeRegion
from .kernels import SpectralParam, fundamental_solution, fundamental_solution_gradient

_SL_KINDS = ("D", "alpha")
_DL_KINDS = ("N", "theta")


@dataclass(frozen=True)
class DataOperator:
    """Symmetric probe-space data matrix with its spectral decomposition.

    ``matrix`` acts on weight-scaled probe vectors.  ``eigenvalues`` are
    sorted by decreasing magnitude; ``eigenvectors[:, k]`` is the
    (Euclidean-orthonormal) eigenvector of ``eigenvalues[k]``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    probe: ProbeRegion
    geom: BoundaryGeometry
    bc_kind: str
    lam: SpectralParam

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def spectrum_magnitudes(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def radiation_matrix(
    bc_kind: str,
    geom: BoundaryGeometry,
    probe: ProbeRegion,
    lam: SpectralParam,
    active_indices: np.ndarray | None = None,
) -> np.ndarray:
    """Weighted boundary-to-probe map G (single or double layer kernel)."""
    b = probe.points[:, None, :]
    y = geom.nodes[None, :, :]
    if bc_kind in _SL_KINDS:
        a = fundamental_solution(2, lam, b, y)
    elif bc_kind in _DL_KINDS:
        grad = fundamental_solution_gradient(2, lam, b, y)
        a = np.einsum("ijk,jk->ij", grad, geom.normals)
    else:
        raise DomainError(f"unknown boundary condition kind {bc_kind!r}")
    g = np.sqrt(probe.weights)[:, None] * a * np.sqrt(geom.weights)[None, :]
    if active_indices is not None:
        g = g[:, active_indices]
    return g


def assemble_F(
    bc: BoundaryCondition,
    geom: BoundaryGeometry,
    probe: ProbeRegion,
    lam: SpectralParam,
) -> DataOperator:
    """Assemble and eigendecompose the data operator F = G M^{-1} G^T."""
    m_op = assemble_M(bc, geom, lam)
    m_inv = invert_M(m_op)
    active = bc.screen.active_indices if bc.screen is not None else None
    g = radiation_matrix(bc.kind, geom, probe, lam, active)
    f = g @ m_inv.matrix @ g.T
    f = 0.5 * (f + f.T)
    eigvals, eigvecs = _sorted_eigh(f)
    return DataOperator(
        matrix=f, eigenvalues=eigvals, eigenvectors=eigvecs,
        probe=probe, geom=geom, bc_kind=bc.kind, lam=lam,
    )


def _sorted_eigh(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eigvals, eigvecs = np.linalg.eigh(f)
    order = np.argsort(-np.abs(eigvals), kind="stable")
    return eigvals[order], eigvecs[:, order]


def eigendecompose(op: DataOperator | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude-sorted symmetric eigendecomposition of a data matrix."""
    mat = op.matrix if isinstance(op, DataOperator) else np.asarray(op, dtype=float)
    res = np.linalg.norm(mat - mat.T) / max(np.linalg.norm(mat), 1e-300)
    if res > 1e-10:
        raise DomainError(f"data matrix not symmetric: residual {res:.2e}")
    if not np.all(np.isfinite(mat)):
        raise DegenerateOperatorError("data matrix has non-finite entries")
    return _sorted_eigh(0.5 * (mat + mat.T))


def add_noise(op: DataOperator, relative_level: float, seed: int) -> DataOperator:
    """Perturb F by a symmetric random matrix of prescribed relative size.

    The perturbation E is scaled so that ||E||_2 = relative_level *
    ||F||_2 exactly; level 0 returns the operator unchanged.
    """
    if relative_level < 0:
        raise DomainError("relative noise level must be non-negative")
    if relative_level == 0.0:
        return op
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(op.matrix.shape)
    e = 0.5 * (e + e.T)
    e_norm = np.linalg.norm(e, 2)
    if e_norm == 0.0:  # pragma: no cover - measure-zero draw
        raise DegenerateOperatorError("degenerate noise draw")
    f_norm = np.linalg.norm(op.matrix, 2)
    f = op.matrix + (relative_level * f_norm / e_norm) * e
    eigvals, eigvecs = _sorted_eigh(f)
    return DataOperator(
        matrix=f, eigenvalues=eigvals, eigenvectors=eigvecs,
        probe=op.probe, geom=op.geom, bc_kind=op.bc_kind, lam=op.lam,
    )


def write_spectrum_csv(op: DataOperator, path: str) -> None:
    """Magnitude-sorted spectrum as CSV (index, eigenvalue, magnitude)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue", "magnitude"])
        for k, mu in enumerate(op.eigenvalues):
            writer.writerow([k, repr(float(mu)), repr(float(abs(mu)))])


def write_matrix_csv(mat: np.ndarray, path: str) -> None:
    """Dense matrix dump, one CSV row per matrix row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(mat):
            writer.writerow([repr(float(v)) for v in row])
