"""The three linked eigenvalue problems.

* Over-determined Neumann scan: Neumann eigenpairs whose boundary trace is
  (numerically) constant witness failure of the Pompeiu property of the
  coefficient triple (Omega; g, q).
* Interior resonance problem: constant boundary trace with zero total
  conormal flux, realized by the tied-boundary eigenspace.
* Generalized two-field transmission problem: two media on one domain
  coupled only through a boundary matrix A, including the harmonic/
  Helmholtz instance obtained by conformally folding the exterior problem
  into the disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import bessel
from .errors import ParameterError, ResolutionError, SolverError
from .fem import (
    EigenResult,
    assemble,
    cluster_values,
    eig_pencil,
    solve_eig,
)
from .meshgen import Mesh
from .xform import MaterialField, isotropic_field

ZERO_MODE_TOL = 1e-8


# -- over-determined Neumann scan ------------------------------------------


@dataclass
class SchifferCandidate:
    lam: float
    boundary_flatness: float
    mode_index: int


@dataclass
class SchifferReport:
    candidates: list[SchifferCandidate]
    eigenvalues: np.ndarray
    flatness: np.ndarray
    clusters: list[list[int]]


def _max_edge_length(mesh: Mesh) -> float:
    p = mesh.nodes[mesh.triangles]
    return max(
        float(np.linalg.norm(p[:, 1] - p[:, 0], axis=1).max()),
        float(np.linalg.norm(p[:, 2] - p[:, 1], axis=1).max()),
        float(np.linalg.norm(p[:, 0] - p[:, 2], axis=1).max()),
    )


def schiffer_scan(
    mesh: Mesh, m: MaterialField, lambda_max: float, flatness_tol: float
) -> SchifferReport:
    """All Neumann eigenpairs up to lambda_max, flagging flat-trace modes.

    Flatness of a mode is std(boundary trace) / L2-norm; modes below
    flatness_tol are returned as candidates (failures of the Pompeiu
    property up to discretization).  The zero mode is excluded: its trace
    is trivially constant.
    """
    if not (0 < flatness_tol <= 0.1):
        raise ParameterError("flatness_tol must lie in (0, 0.1]")
    h = _max_edge_length(mesh)
    if h * math.sqrt(lambda_max) > 2 * math.pi / 10:
        raise ResolutionError(
            f"mesh h={h:.3g} gives fewer than 10 points per wavelength "
            f"at lambda_max={lambda_max}"
        )
    sys = assemble(mesh, m)
    unit_mass = assemble(mesh, isotropic_field(1.0, 1.0)).mass

    count = int(mesh.area() * lambda_max / (4 * math.pi) * 1.6) + 12
    while True:
        count = min(count, sys.n_dofs // 4)
        res = solve_eig(sys, count, constraint="none")
        if res.values[-1] > lambda_max or count == sys.n_dofs // 4:
            break
        count = int(count * 1.5) + 4

    keep = [
        i
        for i, lam in enumerate(res.values)
        if ZERO_MODE_TOL < lam <= lambda_max
    ]
    flat = np.empty(len(keep))
    candidates = []
    for pos, i in enumerate(keep):
        v = res.vectors[:, i]
        trace = v[mesh.outer_boundary]
        l2 = math.sqrt(float(v @ (unit_mass @ v)))
        flat[pos] = float(np.std(trace)) / l2
        if flat[pos] <= flatness_tol:
            candidates.append(
                SchifferCandidate(
                    lam=float(res.values[i]),
                    boundary_flatness=flat[pos],
                    mode_index=i,
                )
            )
    values = res.values[keep]
    return SchifferReport(
        candidates=candidates,
        eigenvalues=values,
        flatness=flat,
        clusters=cluster_values(values),
    )


# -- interior resonance problem ---------------------------------------------


def resonance_eigs(mesh: Mesh, m: MaterialField, count: int) -> EigenResult:
    """Tied-boundary eigenpairs: trace constant, zero total conormal flux.

    The zero eigenvalue (constants survive the tying) is kept and
    reported; callers skip it via frequencies().
    """
    sys = assemble(mesh, m)
    return solve_eig(sys, count, constraint="tied_boundary")


def frequencies(result: EigenResult, drop_zero: bool = True) -> np.ndarray:
    """omega values sqrt(lambda) of an eigenvalue result, zero modes dropped."""
    vals = np.asarray(result.values)
    scale = max(abs(vals).max(), 1.0)
    keep = vals > ZERO_MODE_TOL * scale if drop_zero else vals > -np.inf
    return np.sqrt(np.clip(vals[keep], 0.0, None))


# -- generalized interior transmission problem -------------------------------


@dataclass
class ITEConfig:
    field1: MaterialField    # (g1, q1); q1 may be zero (harmonic equation)
    field2: MaterialField    # (g2, q2)
    A: np.ndarray            # constant 2x2 boundary coupling matrix
    q1_is_zero: bool = False
    fields_differ: bool = True

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.shape != (2, 2) or abs(np.linalg.det(self.A)) < 1e-14:
            raise ParameterError("boundary coupling matrix A must be 2x2 nonsingular")
        if not self.fields_differ:
            raise ParameterError("the two coefficient pairs must differ")


def harmonic_vs_medium_config(medium: MaterialField) -> ITEConfig:
    """Harmonic-vs-Helmholtz instance: first field Laplace (g=I, q=0),
    second field the given medium, traces tied (row [1, -1]) and fluxes
    summed (row [1, 1])."""
    return ITEConfig(
        field1=isotropic_field(1.0, 0.0),
        field2=medium,
        A=np.array([[1.0, -1.0], [1.0, 1.0]]),
        q1_is_zero=True,
    )


def _split(matrix, interior, boundary):
    m = matrix.tocsc()
    return (
        m[interior][:, interior],
        m[interior][:, boundary],
        m[boundary][:, interior],
        m[boundary][:, boundary],
    )


def ite_eigs(mesh: Mesh, cfg: ITEConfig, count: int) -> EigenResult:
    """Generalized transmission eigenvalues of the two-field system.

    The trace combination (first row of A) is imposed by eliminating both
    fields' boundary DOFs in favor of a shared trace vector; the flux
    combination (second row) arises from weighting the two weak-form
    boundary residuals.  With a harmonic first field (q1 = 0) its interior
    DOFs are Schur-eliminated, leaving a symmetric pencil with positive
    definite mass; otherwise a dense QZ decomposition is used and real
    eigenvalues are filtered at 1e-8 relative imaginary part.
    """
    a11, a12 = cfg.A[0]
    a21, a22 = cfg.A[1]
    if a11 == 0.0 or a12 == 0.0:
        raise ParameterError(
            "trace row of A must involve both fields (a11, a12 nonzero)"
        )
    c_v, c_w = -a12, a11

    sys1 = assemble(mesh, cfg.field1)
    sys2 = assemble(mesh, cfg.field2)
    interior = sys1.interior_nodes()
    boundary = sys1.boundary_nodes
    ni, nb = len(interior), len(boundary)

    K1 = _split(sys1.stiffness, interior, boundary)
    K2 = _split(sys2.stiffness, interior, boundary)
    M1 = _split(sys1.mass, interior, boundary)
    M2 = _split(sys2.mass, interior, boundary)

    if cfg.q1_is_zero and a21 != 0.0 and a22 != 0.0:
        # symmetric route: scale the two interior equation blocks so the
        # pencil on (w_int, s) is symmetric, then Schur-eliminate the
        # harmonic field's interior DOFs (lambda-independent since its
        # mass block vanishes).
        sw = a22 / c_w
        lu = spla.splu(K1[0].tocsc())
        X = lu.solve(K1[1].toarray())          # K1_ii^{-1} K1_ib
        S = (
            a21 * c_v * K1[3].toarray()
            + a22 * c_w * K2[3].toarray()
            - a21 * c_v * (K1[2].toarray() @ X)
        )
        K_red = np.block(
            [
                [sw * K2[0].toarray(), a22 * K2[1].toarray()],
                [a22 * K2[2].toarray(), S],
            ]
        )
        M_red = np.block(
            [
                [sw * M2[0].toarray(), a22 * M2[1].toarray()],
                [a22 * M2[2].toarray(), a22 * c_w * M2[3].toarray()],
            ]
        )
        if sw < 0:
            K_red, M_red = -K_red, -M_red
        k_ask = min(count + 4, K_red.shape[0] - 1)
        vals, vecs_r = eig_pencil(sp.csr_matrix(K_red), sp.csr_matrix(M_red), k_ask)
        k_scale = np.abs(K_red).sum(axis=0).max()
        m_scale = np.abs(M_red).sum(axis=0).max()
        keep = vals > ZERO_MODE_TOL * k_scale / m_scale
        vals, vecs_r = vals[keep], vecs_r[:, keep]
        vals, vecs_r = vals[:count], vecs_r[:, :count]

        residuals = np.array(
            [
                np.linalg.norm(K_red @ v - lam * (M_red @ v))
                / (k_scale * np.linalg.norm(v))
                for lam, v in zip(vals, vecs_r.T)
            ]
        )
        n = len(mesh.nodes)
        vectors = np.zeros((2 * n, len(vals)))
        for j in range(len(vals)):
            w_i = vecs_r[:ni, j]
            s = vecs_r[ni:, j]
            v_i = -X @ (c_v * s)
            vectors[interior, j] = v_i
            vectors[boundary, j] = c_v * s
            vectors[n + interior, j] = w_i
            vectors[n + boundary, j] = c_w * s
        return EigenResult(
            values=vals,
            vectors=vectors,
            residuals=residuals,
            clusters=cluster_values(vals),
        )

    # general route: dense QZ on the full eliminated pencil
    def blocks(Bi, rows_scale):
        return (
            rows_scale[0] * Bi[0].toarray(),
            rows_scale[0] * Bi[1].toarray(),
            rows_scale[1] * Bi[2].toarray(),
            rows_scale[1] * Bi[3].toarray(),
        )

    Z = np.zeros((ni, ni))
    k1ii, k1ib, k1bi, k1bb = blocks(K1, (1.0, a21))
    k2ii, k2ib, k2bi, k2bb = blocks(K2, (1.0, a22))
    m1ii, m1ib, m1bi, m1bb = blocks(M1, (1.0, a21))
    m2ii, m2ib, m2bi, m2bb = blocks(M2, (1.0, a22))
    K_full = np.block(
        [
            [k1ii, Z, c_v * k1ib],
            [Z, k2ii, c_w * k2ib],
            [k1bi, k2bi, c_v * k1bb + c_w * k2bb],
        ]
    )
    M_full = np.block(
        [
            [m1ii, Z, c_v * m1ib],
            [Z, m2ii, c_w * m2ib],
            [m1bi, m2bi, c_v * m1bb + c_w * m2bb],
        ]
    )
    if K_full.shape[0] > 4000:
        raise SolverError("QZ route limited to 4000 DOFs; use the symmetric route")
    w, vr = scipy.linalg.eig(K_full, M_full, right=True)
    finite = np.isfinite(w)
    real = np.abs(w.imag) <= 1e-8 * np.maximum(np.abs(w), 1e-30)
    k_scale = np.abs(K_full).sum(axis=0).max()
    m_scale = np.abs(M_full).sum(axis=0).max()
    pick = finite & real & (w.real > ZERO_MODE_TOL * k_scale / m_scale)
    vals = np.sort(w.real[pick])[:count]
    idx = [int(np.argmin(np.abs(w.real - v) + 1e30 * ~pick)) for v in vals]
    vecs_r = vr[:, idx].real

    residuals = np.array(
        [
            np.linalg.norm(K_full @ v - lam * (M_full @ v))
            / (k_scale * np.linalg.norm(v))
            for lam, v in zip(vals, vecs_r.T)
        ]
    )
    n = len(mesh.nodes)
    vectors = np.zeros((2 * n, len(vals)))
    for j in range(len(vals)):
        v_i = vecs_r[:ni, j]
        w_i = vecs_r[ni : 2 * ni, j]
        s = vecs_r[2 * ni :, j]
        vectors[interior, j] = v_i
        vectors[boundary, j] = c_v * s
        vectors[n + interior, j] = w_i
        vectors[n + boundary, j] = c_w * s
    return EigenResult(
        values=vals,
        vectors=vectors,
        residuals=residuals,
        clusters=cluster_values(vals),
    )


def ite_disk_oracle(q_a: float, m_max: int, k_max: int) -> list[tuple[int, float]]:
    """Closed-form transmission frequencies for the unit disk with g = I
    and constant q_a: the angular-order-m branch requires a zero of
    J_{m-1} (of J_1 for m = 0); omega = zero / sqrt(q_a)."""
    if q_a <= 0:
        raise ParameterError("q_a must be positive")
    out = []
    rq = math.sqrt(q_a)
    for m in range(m_max + 1):
        order = 1 if m == 0 else m - 1
        for k in range(1, k_max + 1):
            out.append((m, bessel.bessel_root(order, k) / rq))
    out.sort(key=lambda t: (t[1], t[0]))
    return out


def match_to_oracle(
    computed: np.ndarray, oracle: list[float], rtol: float
) -> list[dict]:
    """Per-oracle-value best computed match and its relative error."""
    rows = []
    comp = np.asarray(computed, dtype=float)
    for w in oracle:
        if len(comp) == 0:
            rows.append({"oracle": w, "matched": None, "rel_error": None, "ok": False})
            continue
        j = int(np.argmin(np.abs(comp - w)))
        err = abs(comp[j] - w) / w
        rows.append(
            {
                "oracle": float(w),
                "matched": float(comp[j]),
                "rel_error": float(err),
                "ok": bool(err <= rtol),
            }
        )
    return rows
