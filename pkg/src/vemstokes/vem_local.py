"""Element-level operators of the lowest-order divergence-free virtual element.

Local degrees of freedom for a cell with ``n`` vertices are ordered as

    [v0x, v0y, v1x, v1y, ..., mu_0, ..., mu_{n-1}]

where ``mu_i`` is the mean of ``v . n`` over edge ``i`` (vertex ``i`` to
``i+1``). Inside this module ``n`` is the outward normal of the cell; the
``signs`` argument converts to a fixed global edge normal.

The polynomial basis of [P1]^2 is, with xs = (x - xc)/h and ys = (y - yc)/h,

    (1, 0), (0, 1), (xs, 0), (ys, 0), (0, xs), (0, ys).

All builders are vectorised over a leading batch axis so whole groups of
cells are processed in one pass; the single-cell functions wrap them.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import (_G3_T, _G3_W, DegenerateGeometryError, batch_measures,
                       batch_scaled_moments)

NPOLY = 6

# x- and y-component coefficients of each basis member over {1, xs, ys}
_PX = np.array([[1, 0, 0], [0, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0], [0, 0, 0]], float)
_PY = np.array([[0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 0, 0], [0, 1, 0], [0, 0, 1]], float)

# grad P2 inside [P1]^2: columns are grad of h*(xs, ys, xs^2/2, xs*ys/2, ys^2/2)
# in basis coefficients; _GRAD_P2_POT holds the matching potentials / h
_GRAD_P2 = np.array([[1, 0, 0, 0, 0],
                     [0, 1, 0, 0, 0],
                     [0, 0, 1, 0, 0],
                     [0, 0, 0, 0.5, 0],
                     [0, 0, 0, 0.5, 0],
                     [0, 0, 0, 0, 1]], float)
_GRAD_P2_POT = np.array([[0, 1, 0, 0, 0, 0],
                         [0, 0, 1, 0, 0, 0],
                         [0, 0, 0, 0.5, 0, 0],
                         [0, 0, 0, 0, 0.5, 0],
                         [0, 0, 0, 0, 0, 0.5]], float)

# quadratic Lagrange basis on [0, 1] (nodes 0, 1/2, 1) at the Gauss points
_L0 = 2.0 * (_G3_T - 0.5) * (_G3_T - 1.0)
_LM = -4.0 * _G3_T * (_G3_T - 1.0)
_L1 = 2.0 * _G3_T * (_G3_T - 0.5)


@dataclass
class LocalDofLayout:
    """DOF bookkeeping for one cell."""

    n: int
    signs: np.ndarray

    @property
    def ndof(self):
        return 3 * self.n

    def vertex_dofs(self, i):
        return 2 * i, 2 * i + 1

    def edge_dof(self, i):
        return 2 * self.n + i


@dataclass
class LocalOperators:
    """Projectors and element matrices of one cell (or a stacked batch).

    ``D`` maps polynomial coefficients to DOFs, ``Pi`` and ``Pi0`` map DOFs to
    polynomial coefficients; ``A``, ``C`` are the discrete stiffness and mass
    matrices, ``Bdiv`` is the divergence row b^K(., 1).
    """

    area: np.ndarray
    centroid: np.ndarray
    diameter: np.ndarray
    D: np.ndarray
    Pi: np.ndarray
    Pi0: np.ndarray
    G: np.ndarray
    M: np.ndarray
    A: np.ndarray
    C: np.ndarray
    Bdiv: np.ndarray

    def __getitem__(self, i):
        return LocalOperators(*(getattr(self, f)[i] for f in self.__dataclass_fields__))


def _edge_frames(X):
    E = np.roll(X, -1, axis=1) - X
    L = np.linalg.norm(E, axis=-1)
    if np.any(L <= 0.0):
        raise DegenerateGeometryError("zero-length edge")
    t = E / L[..., None]
    nrm = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    return L, t, nrm


def batch_dofs_of_polynomials(X, centroid, diam, nrm):
    """D matrices (B, 3n, 6): DOFs of each basis member."""
    B, n, _ = X.shape
    S = (X - centroid[:, None, :]) / diam[:, None, None]
    mono_v = np.stack([np.ones((B, n)), S[..., 0], S[..., 1]], axis=-1)  # (B, n, 3)
    Smid = 0.5 * (S + np.roll(S, -1, axis=1))
    mono_m = np.stack([np.ones((B, n)), Smid[..., 0], Smid[..., 1]], axis=-1)
    D = np.empty((B, 3 * n, NPOLY))
    D[:, 0:2 * n:2, :] = mono_v @ _PX.T
    D[:, 1:2 * n:2, :] = mono_v @ _PY.T
    D[:, 2 * n:, :] = (mono_m @ _PX.T) * nrm[..., 0:1] + (mono_m @ _PY.T) * nrm[..., 1:2]
    return D


def _edge_integral_map(L, t, nrm):
    """W (B, n, 2, 3n): the vector integral over edge i of v, as a map on DOFs.

    Uses v = (v.n) n + (v.t) t with v.t linear along the edge and the mean of
    v.n equal to the edge DOF.
    """
    B, n = L.shape
    W = np.zeros((B, n, 2, 3 * n))
    ttT = 0.5 * L[..., None, None] * t[..., :, None] * t[..., None, :]  # (B, n, 2, 2)
    for i in range(n):
        j = (i + 1) % n
        W[:, i, :, 2 * i:2 * i + 2] += ttT[:, i]
        W[:, i, :, 2 * j:2 * j + 2] += ttT[:, i]
        W[:, i, :, 2 * n + i] = L[:, i, None] * nrm[:, i]
    return W


def _normal_trace_at_gauss(n, nrm):
    """Q (B, n, 3, 3n): v.n at the 3 Gauss points of each edge, as a map on DOFs."""
    B = nrm.shape[0]
    Q = np.zeros((B, n, 3, 3 * n))
    ca = _L0 - 0.25 * _LM
    cb = _L1 - 0.25 * _LM
    for i in range(n):
        j = (i + 1) % n
        Q[:, i, :, 2 * i:2 * i + 2] += ca[None, :, None] * nrm[:, i, None, :]
        Q[:, i, :, 2 * j:2 * j + 2] += cb[None, :, None] * nrm[:, i, None, :]
        Q[:, i, :, 2 * n + i] = 1.5 * _LM[None, :]
    return Q


def _mass_p1(mom):
    """[P1]^2 mass matrices (B, 6, 6) from scaled moments (1, x, y, x2, xy, y2)."""
    m = mom
    Mm = np.stack([
        np.stack([m[:, 0], m[:, 1], m[:, 2]], -1),
        np.stack([m[:, 1], m[:, 3], m[:, 4]], -1),
        np.stack([m[:, 2], m[:, 4], m[:, 5]], -1),
    ], axis=1)
    return _PX @ Mm @ _PX.T + _PY @ Mm @ _PY.T


def batch_local_operators(X, nu=1.0, alpha=1.0, mass_stabilized=False, signs=None):
    """Build every element operator for stacked polygons X (B, n, 2).

    Parameters
    ----------
    X : ndarray (B, n, 2)
        Counterclockwise vertex coordinates of ``B`` cells with ``n`` vertices.
    nu, alpha : float
        Viscosity and the stabilisation factor multiplying the dofi-dofi term.
    mass_stabilized : bool
        Add |K| (I - D Pi0)^T (I - D Pi0) to the mass matrix.
    signs : ndarray (B, n), optional
        Orientation of each edge's global normal relative to the outward
        normal. Edge DOFs of the returned operators then refer to the global
        normal.
    """
    X = np.asarray(X, dtype=float)
    B, n, _ = X.shape
    area, centroid, diam = batch_measures(X)
    L, t, nrm = _edge_frames(X)
    mom = batch_scaled_moments(X, centroid, diam, 2)
    D = batch_dofs_of_polynomials(X, centroid, diam, nrm)
    W = _edge_integral_map(L, t, nrm)
    ndof = 3 * n

    # --- H1 projector: a^K(p, Pi v) = a^K(p, v) plus boundary mean
    wsum = W.sum(axis=1)  # (B, 2, 3n)
    Bm = np.empty((B, NPOLY, ndof))
    Bm[:, 0:2, :] = wsum
    # grad(p_beta) n for the four linear members, scaled by 1/h
    gn = np.zeros((B, n, 4, 2))
    gn[..., 0, 0] = nrm[..., 0]
    gn[..., 1, 0] = nrm[..., 1]
    gn[..., 2, 1] = nrm[..., 0]
    gn[..., 3, 1] = nrm[..., 1]
    Bm[:, 2:, :] = nu * np.einsum("bikc,bicj->bkj", gn, W) / diam[:, None, None]
    Gm = Bm @ D
    try:
        Pi = np.linalg.solve(Gm, Bm)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("singular H1 projector system") from exc

    # stiffness Gram of the polynomial basis
    G = np.zeros((B, NPOLY, NPOLY))
    G[:, 2:, 2:] = (nu * area / diam**2)[:, None, None] * np.eye(4)

    # --- L2 projector
    M = _mass_p1(mom)
    flux = np.zeros((B, ndof))
    flux[:, 2 * n:] = L
    div = flux / area[:, None]  # constant divergence per unit DOF
    # split each basis member as p = grad(s) + r * g with g the member of
    # [P1]^2 that is L2(K)-orthogonal to grad P2; the g-part then follows from
    # Pi v by the enhancement constraint. Potentials s are in scaled monomials
    # (1, x, y, x2, xy, y2), all multiplied by h.
    pot = np.zeros((NPOLY, 6))
    pot[0, 1] = 1.0            # (1, 0)  = grad(h x)
    pot[1, 2] = 1.0            # (0, 1)  = grad(h y)
    pot[2, 3] = 0.5            # (x, 0)  = grad(h x^2 / 2)
    pot[3, 4] = 0.5            # (y, 0)  = grad(h xy / 2) - rot / 2
    pot[4, 4] = 0.5            # (0, x)  = grad(h xy / 2) + rot / 2
    pot[5, 5] = 0.5            # (0, y)  = grad(h y^2 / 2)
    rot_coef = np.array([0.0, 0.0, 0.0, -0.5, 0.5, 0.0])
    rot_vec = np.array([0.0, 0.0, 0.0, -1.0, 1.0, 0.0])  # rot = (-y, x) = -p3 + p4
    # rot = grad(s0) + g
    GMG = _GRAD_P2.T @ M @ _GRAD_P2
    c0 = np.linalg.solve(GMG, (_GRAD_P2.T @ (M @ rot_vec)[..., None]))[..., 0]  # (B, 5)
    gperp = rot_vec[None] - c0 @ _GRAD_P2.T
    pot = pot[None] + rot_coef[None, :, None] * (c0 @ _GRAD_P2_POT)[:, None, :]  # (B, 6, 6)

    S = (X - centroid[:, None, :]) / diam[:, None, None]
    Sn = np.roll(S, -1, axis=1)
    gp = S[:, :, None, :] + _G3_T[None, None, :, None] * (Sn - S)[:, :, None, :]  # (B, n, 3, 2)
    gx, gy = gp[..., 0], gp[..., 1]
    mono_g = np.stack([np.ones_like(gx), gx, gy, gx * gx, gx * gy, gy * gy], axis=-1)
    s_g = np.einsum("bigm,bpm->bigp", mono_g, pot)  # potential values / h
    Q = _normal_trace_at_gauss(n, nrm)
    # sum_edges int_edge (v.n) s  -> (B, 6, 3n)
    wts = L[..., None] * _G3_W[None, None, :]
    edge_part = np.einsum("big,bigp,bigj->bpj", wts, s_g, Q)
    int_s = np.einsum("bm,bpm->bp", mom, pot)  # int_K s / h
    R = diam[:, None, None] * (edge_part - int_s[:, :, None] * div[:, None, :])
    rot_int = (M @ gperp[..., None]).transpose(0, 2, 1) @ Pi  # int_K Pi v . g
    R += rot_coef[None, :, None] * rot_int
    try:
        Pi0 = np.linalg.solve(M, R)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("singular L2 projector system") from exc

    # --- element matrices
    eye = np.eye(ndof)
    Ires = eye[None] - D @ Pi
    PiT = np.swapaxes(Pi, 1, 2)
    A = PiT @ G @ Pi + (alpha * nu) * np.swapaxes(Ires, 1, 2) @ Ires
    Pi0T = np.swapaxes(Pi0, 1, 2)
    C = Pi0T @ M @ Pi0
    if mass_stabilized:
        I0 = eye[None] - D @ Pi0
        C = C + area[:, None, None] * np.swapaxes(I0, 1, 2) @ I0
    Bdiv = -flux

    if signs is not None:
        T = np.ones((B, ndof))
        T[:, 2 * n:] = signs
        D = D * T[:, :, None]
        Pi = Pi * T[:, None, :]
        Pi0 = Pi0 * T[:, None, :]
        A = A * T[:, :, None] * T[:, None, :]
        C = C * T[:, :, None] * T[:, None, :]
        Bdiv = Bdiv * T

    return LocalOperators(area, centroid, diam, D, Pi, Pi0, G, M, A, C, Bdiv)


def _one(vertices):
    X = np.asarray(vertices, dtype=float)[None]
    return X


def edge_trace(a, b, va, vb, mu):
    """Normal and tangential traces of a local field on the edge a -> b.

    ``va``, ``vb`` are the endpoint vectors and ``mu`` the mean of v.n, with n
    the right-hand normal of the directed edge. Returns
    ``(normal_values, tangential_values)`` where the normal trace is the
    quadratic through the endpoint and midpoint values and the tangential
    trace is linear; both are given as values at (start, midpoint, end).
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    e = b - a
    t = e / np.linalg.norm(e)
    nrm = np.array([t[1], -t[0]])
    fa, fb = float(np.dot(va, nrm)), float(np.dot(vb, nrm))
    fm = (6.0 * mu - fa - fb) / 4.0
    ta, tb = float(np.dot(va, t)), float(np.dot(vb, t))
    return np.array([fa, fm, fb]), np.array([ta, 0.5 * (ta + tb), tb])


def build_h1_projector(vertices, nu=1.0):
    """Pi matrix (6, 3n) of one cell in the outward-normal DOF convention."""
    return batch_local_operators(_one(vertices), nu=nu).Pi[0]


def build_l2_projector(vertices, nu=1.0):
    """Pi0 matrix (6, 3n) of one cell in the outward-normal DOF convention."""
    return batch_local_operators(_one(vertices), nu=nu).Pi0[0]


def local_matrices(vertices, nu=1.0, alpha=1.0, mass_stabilized=False, signs=None):
    """All element operators of a single cell."""
    s = None if signs is None else np.asarray(signs, float)[None]
    return batch_local_operators(_one(vertices), nu, alpha, mass_stabilized, s)[0]


def dofs_of_polynomial(vertices, coeffs):
    """DOF vector of the [P1]^2 field with the given basis coefficients."""
    X = _one(vertices)
    area, centroid, diam = batch_measures(X)
    _, _, nrm = _edge_frames(X)
    return batch_dofs_of_polynomials(X, centroid, diam, nrm)[0] @ np.asarray(coeffs, float)


def polynomial_coefficients(vertices, fx, fy):
    """Basis coefficients of the linear field (fx, fy), each given as (c0, cx, cy)
    in physical coordinates f = c0 + cx*x + cy*y."""
    area, centroid, diam = batch_measures(_one(vertices))
    xc, yc = centroid[0]
    h = diam[0]
    out = np.zeros(NPOLY)
    for comp, (c0, cx, cy) in enumerate((fx, fy)):
        const = c0 + cx * xc + cy * yc
        out[comp] = const
        out[2 + 2 * comp] = cx * h
        out[3 + 2 * comp] = cy * h
    return out


def stress_gradients(Pi_u, diam):
    """Velocity gradients (B, 2, 2) of Pi u from projector coefficients (B, 6)."""
    g = Pi_u[:, 2:] / diam[:, None]
    return g.reshape(-1, 2, 2)
