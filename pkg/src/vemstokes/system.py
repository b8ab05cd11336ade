"""Global DOF numbering, saddle-point assembly and the generalized eigensolve."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .polymesh import DIRICHLET, NEUMANN, MeshError
from .vem_local import batch_local_operators

log = logging.getLogger(__name__)


class SingularSystemError(RuntimeError):
    """The shifted saddle-point matrix could not be factorised."""


class EigenIterationError(RuntimeError):
    """The Krylov iteration did not converge."""


@dataclass(frozen=True)
class Config:
    nu: float = 1.0
    alpha: float = 1.0
    bc: str = "clamped"
    mass_stabilized: bool = False

    def __post_init__(self):
        if not self.nu > 0 or not self.alpha > 0:
            raise ValueError("nu and alpha must be positive")
        if self.bc not in ("clamped", "mixed"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")


@dataclass
class DofMap:
    """Global numbering.

    Velocity DOFs: 2*v, 2*v+1 for vertex ``v``; ``2*nv + e`` for edge ``e``.
    Pressure DOF of cell ``k`` is ``n_velocity + k``; the optional zero-mean
    multiplier comes last.
    """

    n_vertices: int
    n_edges: int
    n_cells: int
    constrained: np.ndarray
    free: np.ndarray
    has_multiplier: bool

    @property
    def n_velocity(self):
        return 2 * self.n_vertices + self.n_edges

    @property
    def n_free(self):
        return len(self.free)

    @property
    def size(self):
        """Dimension of the reduced saddle system."""
        return self.n_free + self.n_cells + int(self.has_multiplier)


@dataclass
class CellGroup:
    """Element data of the cells that share a vertex count."""

    cells: np.ndarray
    dofs: np.ndarray      # (B, 3n) global velocity DOFs
    D: np.ndarray
    Pi: np.ndarray
    Pi0: np.ndarray
    M: np.ndarray
    area: np.ndarray
    diameter: np.ndarray
    centroid: np.ndarray


@dataclass
class SaddleSystem:
    """Reduced pencil (A, B) on free velocity DOFs, pressures and multiplier."""

    A: sps.csc_matrix
    B: sps.csc_matrix
    dofmap: DofMap
    config: Config
    groups: list = field(repr=False)
    Ah: sps.csr_matrix = field(repr=False)      # full velocity stiffness
    Ch: sps.csr_matrix = field(repr=False)      # full velocity mass
    Bh: sps.csr_matrix = field(repr=False)      # (n_cells, n_velocity) divergence


def _boundary_tags(mesh, bc):
    tags = mesh.boundary_tags.copy()
    bnd = mesh.edge_cells[:, 1] < 0
    if bc == "clamped":
        tags[bnd] = DIRICHLET
        return tags
    if mesh.domain not in (None, "unit_square"):
        raise MeshError("mixed boundary conditions are defined on the unit square only")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if not (np.allclose(lo, 0.0) and np.allclose(hi, 1.0)):
        raise MeshError("mixed boundary conditions are defined on the unit square only")
    bottom = np.abs(mesh.edge_midpoints[:, 1]) < 1e-12
    tags[bnd] = NEUMANN
    tags[bnd & bottom] = DIRICHLET
    return tags


def build_dofmap(mesh, bc="clamped"):
    tags = _boundary_tags(mesh, bc)
    nv, ne = mesh.n_vertices, mesh.n_edges
    dir_edges = np.flatnonzero(tags == DIRICHLET)
    dir_verts = np.unique(mesh.edges[dir_edges].ravel())
    constrained = np.unique(np.concatenate([2 * dir_verts, 2 * dir_verts + 1, 2 * nv + dir_edges]))
    mask = np.ones(2 * nv + ne, dtype=bool)
    mask[constrained] = False
    bnd = mesh.edge_cells[:, 1] < 0
    has_multiplier = bool(np.all(tags[bnd] == DIRICHLET))
    return DofMap(nv, ne, mesh.n_cells, constrained, np.flatnonzero(mask), has_multiplier)


def element_groups(mesh, config=Config()):
    """Yield (CellGroup, A_loc, C_loc, Bdiv_loc) per vertex-count group."""
    nv = mesh.n_vertices
    for n, idx in sorted(mesh.groups.items()):
        vidx = np.stack([mesh.cells[k] for k in idx])
        eidx = np.stack([mesh.cell_edges(k) for k in idx])
        signs = np.stack([mesh.cell_signs(k) for k in idx])
        X = mesh.vertices[vidx]
        ops = batch_local_operators(X, config.nu, config.alpha, config.mass_stabilized, signs)
        dofs = np.empty((len(idx), 3 * n), dtype=np.int64)
        dofs[:, 0:2 * n:2] = 2 * vidx
        dofs[:, 1:2 * n:2] = 2 * vidx + 1
        dofs[:, 2 * n:] = 2 * nv + eidx
        grp = CellGroup(idx, dofs, ops.D, ops.Pi, ops.Pi0, ops.M, ops.area, ops.diameter,
                        ops.centroid)
        yield grp, ops.A, ops.C, ops.Bdiv


def assemble(mesh, config=Config()):
    """Assemble the reduced symmetric pencil of the discrete eigenproblem.

    Returns
    -------
    DofMap, SaddleSystem
    """
    dm = build_dofmap(mesh, config.bc)
    nvel = dm.n_velocity
    rows, cols, avals, cvals = [], [], [], []
    brow, bcol, bval = [], [], []
    groups = []
    for grp, A, C, Bd in element_groups(mesh, config):
        groups.append(grp)
        nd = grp.dofs.shape[1]
        rows.append(np.repeat(grp.dofs, nd, axis=1).ravel())
        cols.append(np.tile(grp.dofs, (1, nd)).ravel())
        avals.append(A.ravel())
        cvals.append(C.ravel())
        brow.append(np.repeat(grp.cells, nd))
        bcol.append(grp.dofs.ravel())
        bval.append(Bd.ravel())
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    Ah = sps.csr_matrix((np.concatenate(avals), (rows, cols)), shape=(nvel, nvel))
    Ch = sps.csr_matrix((np.concatenate(cvals), (rows, cols)), shape=(nvel, nvel))
    # exact symmetry; local matrices are symmetric only up to rounding
    Ah = (0.5 * (Ah + Ah.T)).tocsr()
    Ch = (0.5 * (Ch + Ch.T)).tocsr()
    Bh = sps.csr_matrix((np.concatenate(bval), (np.concatenate(brow), np.concatenate(bcol))),
                        shape=(mesh.n_cells, nvel))

    f = dm.free
    Af = Ah[f][:, f]
    Cf = Ch[f][:, f]
    Bf = Bh[:, f]
    blocks = [[Af, Bf.T], [Bf, None]]
    if dm.has_multiplier:
        m = sps.csr_matrix(mesh.areas[None, :])
        blocks = [[Af, Bf.T, None], [Bf, None, m.T], [None, m, None]]
    A = sps.bmat(blocks, format="csc")
    Bmat = sps.block_diag([Cf, sps.csr_matrix((dm.size - dm.n_free,) * 2)], format="csc")
    return dm, SaddleSystem(A, Bmat, dm, config, groups, Ah, Ch, Bh)


@dataclass
class EigenSolution:
    """Eigenpairs in ascending order.

    ``u`` holds full velocity DOF vectors (constrained entries are zero) as
    columns, normalised so that c_h(u, u) = 1; ``p`` holds cell pressures.
    """

    eigenvalues: np.ndarray
    u: np.ndarray
    p: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    def pair(self, i):
        return self.eigenvalues[i], self.u[:, i], self.p[:, i]


class SaddleSolver:
    """Direct solver for the shifted pencil matrix A - shift * B.

    When the zero-mean multiplier is present its dense row would wreck the
    sparse ordering, so the factorization instead pins the pressure of the
    first cell and restores the multiplier constraint afterwards. This is
    exact: the divergence rows sum to zero on a fully clamped boundary, so
    the pinned cell's row is implied by the others.
    """

    def __init__(self, system, shift=0.0):
        dm = system.dofmap
        K = system.A - shift * system.B if shift else system.A
        K = K.tocsc()
        self.nf, self.nc = dm.n_free, dm.n_cells
        self.multiplier = dm.has_multiplier
        if self.multiplier:
            n = K.shape[0]
            self.m = np.asarray(K[self.nf:self.nf + self.nc, n - 1].todense()).ravel()
            keep = np.r_[0:self.nf, self.nf + 1:n - 1]
            K = K[keep][:, keep]
        try:
            self.lu = spla.splu(K.tocsc(), permc_spec="COLAMD",
                                options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SingularSystemError(f"factorization failed: {exc}") from exc
        self.shape = system.A.shape

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if not self.multiplier:
            return self.lu.solve(rhs)
        nf, nc, m = self.nf, self.nc, self.m
        f, b, g = rhs[:nf], rhs[nf:nf + nc], rhs[nf + nc]
        r = b.sum() / m.sum()
        y = self.lu.solve(np.concatenate([f, (b - m * r)[1:]]))
        p = np.concatenate([[0.0], y[nf:]])
        p += (g - m @ p) / m.sum()
        return np.concatenate([y[:nf], p, [r]])

    def operator(self):
        return spla.LinearOperator(self.shape, matvec=self.solve, dtype=float)


def solve_eigs(system, k=4, shift=0.0, tol=1e-10, maxiter=None, v0_seed=0):
    """Smallest ``k`` finite eigenpairs of A U = lambda B U by shift-invert Lanczos.

    The operator (A - shift B)^{-1} B is self-adjoint in the (semi) inner
    product of B, whose kernel carries only the infinite eigenvalues; those
    map to zero and never appear among the largest Ritz values.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if shift < 0:
        raise ValueError("shift must be non-negative")
    A, B, dm = system.A, system.B, system.dofmap
    n = A.shape[0]
    nev = k + 2
    solver = SaddleSolver(system, shift)
    op = solver.operator()
    ncv = min(n - 1, max(2 * nev, nev + 8))
    rng = np.random.default_rng(v0_seed)
    v0 = rng.standard_normal(n)
    try:
        if nev >= ncv:
            raise ValueError
        vals, vecs = spla.eigsh(A, k=nev, M=B, sigma=shift, OPinv=op, which="LM",
                                ncv=ncv, tol=tol, v0=v0, maxiter=maxiter, mode="normal")
    except spla.ArpackNoConvergence as exc:
        raise EigenIterationError(
            f"ARPACK did not converge: {len(exc.eigenvalues)} of {nev} pairs") from exc
    except ValueError:
        # tiny systems: fall back to a dense solve of the same pencil
        vals, vecs = _dense_pencil(A.toarray(), B.toarray())
    finite = np.isfinite(vals) & (vals > 0)
    vals, vecs = vals[finite], vecs[:, finite]
    order = np.argsort(vals)
    vals, vecs = vals[order][:k], vecs[:, order][:, :k]
    # one step of shifted inverse iteration removes the components in the
    # kernel of B that the Krylov basis carries along
    vecs = np.column_stack([solver.solve(B @ v) for v in vecs.T]) * (vals - shift)
    vecs = _b_orthonormalize(vals, vecs, B)

    nf = dm.n_free
    u = np.zeros((dm.n_velocity, len(vals)))
    u[dm.free] = vecs[:nf]
    p = vecs[nf:nf + dm.n_cells]
    # fix sign: largest-magnitude velocity DOF positive
    piv = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[piv, np.arange(u.shape[1])])
    s[s == 0] = 1.0
    u *= s
    p = p * s
    vecs = vecs * s
    AU = A @ vecs
    res = np.linalg.norm(AU - (B @ vecs) * vals, axis=0) / np.maximum(np.linalg.norm(AU, axis=0), 1e-300)
    return EigenSolution(vals, u, p, res)


def _dense_pencil(A, B):
    import scipy.linalg as sla

    theta, V = sla.eig(B, A)
    theta = theta.real
    ok = np.abs(theta) > 1e-12 * np.abs(theta).max()
    return 1.0 / theta[ok], V[:, ok].real


def _b_orthonormalize(vals, V, B, gap=1e-8):
    """Make clusters of (numerically) equal eigenvalues B-orthonormal."""
    V = V.copy()
    i = 0
    k = len(vals)
    while i < k:
        j = i + 1
        while j < k and abs(vals[j] - vals[i]) <= gap * abs(vals[i]):
            j += 1
        blk = V[:, i:j]
        G = blk.T @ (B @ blk)
        w, Q = np.linalg.eigh(0.5 * (G + G.T))
        V[:, i:j] = blk @ (Q / np.sqrt(w))
        i = j
    return V


def dense_eigenvalues(system):
    """All finite positive eigenvalues of the pencil via a dense solve (oracle)."""
    import scipy.linalg as sla

    A = system.A.toarray()
    B = system.B.toarray()
    theta = sla.eigvals(B, A)
    theta = theta.real[np.abs(theta.imag) < 1e-8]
    theta = theta[theta > 1e-10 * np.abs(theta).max()]
    return np.sort(1.0 / theta)


def spectral_gap_report(eigenvalues, flag_tol=1e-6):
    """Relative gaps |l_{i+1} - l_i| / l_i and a flag for numerically multiple pairs."""
    lam = np.asarray(eigenvalues, dtype=float)
    if len(lam) < 2:
        raise ValueError("need at least two eigenvalues")
    gaps = np.abs(np.diff(lam)) / np.abs(lam[:-1])
    return gaps, gaps < flag_tol


def divergence_residual(system, u):
    """max_K |b^K(u, 1)| for a full velocity vector."""
    return float(np.max(np.abs(system.Bh @ u)))


def export_coo(matrix, path):
    """Write a sparse matrix as 0-based 'row col value' lines after an 'n m nnz' header."""
    M = sps.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for r, c, v in zip(M.row, M.col, M.data):
            fh.write(f"{r} {c} {v:.17g}\n")
