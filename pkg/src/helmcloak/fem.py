"""P1 finite elements for div(g grad u) + lambda q u = f on triangulations.

Assembly uses the interior 3-point triangle rule (barycentric permutations
of (2/3, 1/6, 1/6), exact for quadratics), so coefficients are only ever
evaluated strictly inside triangles; this keeps piecewise media on
interface-conforming meshes unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    AssemblyError,
    ConsistencyError,
    ParameterError,
    ResonanceError,
    SolverError,
)
from .meshgen import Mesh
from .xform import MaterialField

_QP_BARY = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)

DENSE_EIG_LIMIT = 6000
# well-conditioned Helmholtz solves show pivot ratios around 1e-1, exact
# discrete resonances around 1e-11; this threshold separates the two
_PIVOT_TOL = 1e-9


@dataclass
class AssembledSystem:
    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    load: np.ndarray
    boundary_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.boundary_nodes = np.asarray(self.mesh.outer_boundary, dtype=int)

    @property
    def n_dofs(self) -> int:
        return self.stiffness.shape[0]

    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.nonzero(mask)[0]


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray          # (n_dofs, k)
    residuals: np.ndarray
    clusters: list[list[int]]


def assemble(mesh: Mesh, m: MaterialField, f=None) -> AssembledSystem:
    """Assemble stiffness, mass and load for the coefficient pair (g, q).

    The source f (a callable on points) is restricted to region-tag-0
    triangles, realizing the characteristic-function factor on composite
    meshes; on single-region meshes that is the whole domain.
    """
    pts = mesh.nodes[mesh.triangles]                       # (T, 3, 2)
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise AssemblyError(
            f"non-positive triangle orientation at triangle {int(np.argmin(det))}"
        )
    area = 0.5 * det

    # constant P1 gradients: grad phi_i, shape (T, 3, 2)
    grads = np.empty((len(pts), 3, 2))
    grads[:, 0, 0] = pts[:, 1, 1] - pts[:, 2, 1]
    grads[:, 0, 1] = pts[:, 2, 0] - pts[:, 1, 0]
    grads[:, 1, 0] = pts[:, 2, 1] - pts[:, 0, 1]
    grads[:, 1, 1] = pts[:, 0, 0] - pts[:, 2, 0]
    grads[:, 2, 0] = pts[:, 0, 1] - pts[:, 1, 1]
    grads[:, 2, 1] = pts[:, 1, 0] - pts[:, 0, 0]
    grads /= det[:, None, None]

    qp = np.einsum("qj,tjd->tqd", _QP_BARY, pts)           # (T, 3, 2)
    w = area / 3.0

    try:
        g_qp = m.g(qp)                                     # (T, 3, 2, 2)
        q_qp = m.q(qp)                                     # (T, 3)
    except Exception as exc:  # noqa: BLE001 - report which element failed
        raise AssemblyError(f"coefficient evaluation failed: {exc}") from exc

    g_bar = w[:, None, None] * g_qp.sum(axis=1)            # int_T g
    k_loc = np.einsum("tid,tde,tje->tij", grads, g_bar, grads)

    # phi values at the quadrature points equal the barycentric weights
    phi = _QP_BARY                                          # (q, i)
    m_loc = np.einsum("tq,qi,qj->tij", w[:, None] * q_qp, phi, phi)

    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    n = len(mesh.nodes)
    K = sp.coo_matrix((k_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((m_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()

    F = np.zeros(n)
    if f is not None:
        active = mesh.region_tag == 0
        try:
            f_qp = np.asarray(f(qp[active]), dtype=float)
        except Exception as exc:  # noqa: BLE001
            raise AssemblyError(f"source evaluation failed: {exc}") from exc
        f_loc = np.einsum("tq,qi->ti", w[active, None] * f_qp, phi)
        np.add.at(F, mesh.triangles[active].reshape(-1), f_loc.reshape(-1))

    return AssembledSystem(mesh=mesh, stiffness=K, mass=M, load=F)


def _check_pivots(lu, what: str) -> None:
    d = np.abs(lu.U.diagonal())
    if d.min() < _PIVOT_TOL * d.max():
        raise ResonanceError(f"near-singular factorization in {what}")


def factorize_interior(sys: AssembledSystem, lam: float):
    """Sparse LU of (K - lam M) restricted to interior DOFs, pivot-checked."""
    interior = sys.interior_nodes()
    A = (sys.stiffness - lam * sys.mass).tocsc()
    A_ii = A[interior][:, interior]
    lu = spla.splu(A_ii)
    _check_pivots(lu, f"solve_dirichlet at lambda={lam}")
    return lu, interior, A


def solve_dirichlet(
    sys: AssembledSystem,
    boundary_values: np.ndarray,
    lam: float,
    factorization=None,
) -> np.ndarray:
    """Solve (K - lam M) u = F with Dirichlet data on the outer boundary.

    boundary_values follow the outer ring order.  A precomputed
    factorization from factorize_interior may be passed to share one LU
    across many right-hand sides.
    """
    bvals = np.asarray(boundary_values, dtype=float)
    if bvals.shape != sys.boundary_nodes.shape:
        raise ParameterError("boundary value count does not match the outer ring")
    lu, interior, A = factorization or factorize_interior(sys, lam)
    u = np.zeros(sys.n_dofs)
    u[sys.boundary_nodes] = bvals
    rhs = sys.load[interior] - A[interior][:, sys.boundary_nodes] @ bvals
    u[interior] = lu.solve(rhs)
    return u


def _boundary_weights(sys: AssembledSystem) -> np.ndarray:
    """Lumped boundary mass: half-sum of adjacent outer-ring edge lengths."""
    ring = sys.boundary_nodes
    p = sys.mesh.nodes[ring]
    seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    return 0.5 * (seg + np.roll(seg, 1))


def residual_vector(sys: AssembledSystem, u: np.ndarray, lam: float) -> np.ndarray:
    return sys.stiffness @ u - lam * (sys.mass @ u) - sys.load


def boundary_flux(sys: AssembledSystem, u: np.ndarray, lam: float) -> np.ndarray:
    """Variationally consistent conormal flux on the outer boundary ring.

    The residual functional r = K u - lam M u - F vanishes on interior
    test functions when u solves the interior equations; its boundary
    entries are the flux paired with boundary hats.  Dividing by the
    lumped boundary mass turns that into nodal flux values.
    """
    r = residual_vector(sys, u, lam)
    interior = sys.interior_nodes()
    scale = max(np.abs(r[sys.boundary_nodes]).max(), 1e-30)
    if len(interior) and np.abs(r[interior]).max() > 1e-8 * max(scale, 1.0):
        raise ConsistencyError("vector does not solve the interior equations")
    return r[sys.boundary_nodes] / _boundary_weights(sys)


def _constraint_matrix(sys: AssembledSystem, constraint: str) -> sp.csr_matrix:
    n = sys.n_dofs
    if constraint == "none":
        return sp.identity(n, format="csr")
    interior = sys.interior_nodes()
    if constraint == "dirichlet":
        C = sp.coo_matrix(
            (np.ones(len(interior)), (interior, np.arange(len(interior)))),
            shape=(n, len(interior)),
        )
        return C.tocsr()
    if constraint == "tied_boundary":
        ni = len(interior)
        rows = np.concatenate([interior, sys.boundary_nodes])
        cols = np.concatenate(
            [np.arange(ni), np.full(len(sys.boundary_nodes), ni)]
        )
        C = sp.coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(n, ni + 1)
        )
        return C.tocsr()
    raise ParameterError(f"unknown constraint {constraint!r}")


def cluster_values(values: np.ndarray, rel_gap: float = 0.005) -> list[list[int]]:
    """Group ascending values whose consecutive relative gap is below rel_gap."""
    clusters: list[list[int]] = []
    for i, v in enumerate(values):
        if clusters:
            prev = values[clusters[-1][-1]]
            scale = max(abs(prev), abs(v), 1e-12)
            if abs(v - prev) / scale < rel_gap:
                clusters[-1].append(i)
                continue
        clusters.append([i])
    return clusters


def eig_pencil(K, M, count: int) -> tuple:
    """Smallest `count` eigenpairs of K v = lambda M v (symmetric, M > 0).

    Dense below DENSE_EIG_LIMIT DOFs, deterministic shift-invert Lanczos
    above.
    """
    n = K.shape[0]
    if count > n:
        raise ParameterError("requested more eigenpairs than DOFs")
    if n <= DENSE_EIG_LIMIT:
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
        Md = M.toarray() if sp.issparse(M) else np.asarray(M)
        Kd = 0.5 * (Kd + Kd.T)
        Md = 0.5 * (Md + Md.T)
        try:
            vals, vecs = scipy.linalg.eigh(
                Kd, Md, subset_by_index=[0, count - 1]
            )
        except scipy.linalg.LinAlgError as exc:
            raise SolverError(f"dense generalized eigensolve failed: {exc}") from exc
        return vals, vecs
    sigma = -1e-6 * abs(K.diagonal()).max()
    try:
        vals, vecs = spla.eigsh(
            K.tocsc(),
            k=count,
            M=M.tocsc(),
            sigma=sigma,
            which="LM",
            v0=np.ones(n),
        )
    except Exception as exc:  # noqa: BLE001
        raise SolverError(f"shift-invert eigensolve failed: {exc}") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def solve_eig(sys: AssembledSystem, count: int, constraint: str = "none") -> EigenResult:
    """Smallest eigenpairs of K v = lambda M v on the constrained space.

    constraint: 'none' (natural/Neumann), 'dirichlet' (outer trace zero),
    or 'tied_boundary' (all outer-boundary DOFs merged into one constant
    trace, with the zero total-flux condition arising weakly).
    """
    C = _constraint_matrix(sys, constraint)
    if count > C.shape[1] // 4 + 1:
        raise ParameterError("count must stay below a quarter of the DOF count")
    K_r = (C.T @ sys.stiffness @ C).tocsr()
    M_r = (C.T @ sys.mass @ C).tocsr()
    vals, vecs_r = eig_pencil(K_r, M_r, count)

    vecs = C @ vecs_r
    # M-normalize (M is definite on every constrained space used here)
    for j in range(vecs.shape[1]):
        nrm = float(vecs[:, j] @ (sys.mass @ vecs[:, j]))
        if nrm <= 0:
            raise SolverError("mass matrix not positive definite on eigenvector")
        vecs[:, j] /= np.sqrt(nrm)

    k_scale = spla.norm(K_r, 1)
    residuals = np.empty(len(vals))
    for j, lam in enumerate(vals):
        r = K_r @ vecs_r[:, j] - lam * (M_r @ vecs_r[:, j])
        residuals[j] = np.linalg.norm(r) / (k_scale * np.linalg.norm(vecs_r[:, j]))

    return EigenResult(
        values=np.asarray(vals),
        vectors=vecs,
        residuals=residuals,
        clusters=cluster_values(np.asarray(vals)),
    )
