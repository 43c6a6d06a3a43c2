"""End-to-end regularized cloaking experiments.

An experiment fills the shell 1 < |x| < 2 with the push-forward of the
trivial medium under the regularized blow-up map, embeds a target medium
(and optional source) in the unit disk, and measures invisibility as the
relative spectral-norm distance between the resulting boundary DtN matrix
and the free-space one.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bessel
from .dtn import DtNMatrix, dtn_error, dtn_free_analytic, dtn_matrix
from .errors import ParameterError
from .fem import AssembledSystem
from .meshgen import Mesh, mesh_from_radii
from .xform import MaterialField, isotropic_field, push_forward, reg_cloak_map

OUTER_RADIUS = 2.0
INTERFACE_RADIUS = 1.0


@dataclass
class CloakExperiment:
    epsilon: float
    omega: float
    target: MaterialField
    source: Callable | None = None
    modes: int = 8
    mesh_h: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ParameterError("epsilon must lie in (0, 1]")
        if self.modes < 1:
            raise ParameterError("need at least one Fourier mode")
        if self.mesh_h <= 0:
            raise ParameterError("mesh_h must be positive")


@dataclass
class SweepRecord:
    epsilon: float
    dtn_error_value: float
    dofs: int
    factorization_seconds: float


def _graded_spacings(width: float, h_fine: float, h: float, ratio: float = 1.4):
    """Spacings filling `width`, starting at h_fine and growing to h."""
    spacings = []
    s = h_fine
    left = width
    while left > 1.5 * s and s < h:
        spacings.append(s)
        left -= s
        s = min(h, s * ratio)
    n = max(1, int(math.ceil(left / min(h, 1.5 * s) - 1e-12)))
    spacings.extend([left / n] * n)
    return spacings


def cloak_mesh(epsilon: float, h: float) -> Mesh:
    """Composite disk of radius 2 with interface ring exactly at radius 1.

    The shell coefficients steepen like 1/epsilon near the interface, so
    the radial spacing is graded down to epsilon/4 on both sides of it.
    """
    h_fine = min(h, epsilon / 4.0)
    inner = _graded_spacings(INTERFACE_RADIUS, h_fine, h)
    outer = _graded_spacings(OUTER_RADIUS - INTERFACE_RADIUS, h_fine, h)

    radii = []
    r = INTERFACE_RADIUS
    for s in inner:
        radii.append(r)
        r -= s
    radii = sorted(radii)
    r = INTERFACE_RADIUS
    for s in outer:
        r += s
        radii.append(r)
    radii[-1] = OUTER_RADIUS
    return mesh_from_radii(
        radii,
        interface_radius=INTERFACE_RADIUS,
        outer_curve=("circle", OUTER_RADIUS),
    )


def piecewise_radial_field(
    r_split: float, inner: MaterialField, outer: MaterialField
) -> MaterialField:
    """Coefficients dispatched on |x| < r_split (evaluation points are
    always strictly inside triangles, so the split is unambiguous on
    interface-conforming meshes)."""

    def dispatch(eval_inner, eval_outer, x, item_shape):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        mask = r < r_split
        out = np.empty(x.shape[:-1] + item_shape)
        if np.any(mask):
            out[mask] = eval_inner(x[mask])
        if np.any(~mask):
            out[~mask] = eval_outer(x[~mask])
        return out

    return MaterialField(
        g=lambda x: dispatch(inner.g, outer.g, x, (2, 2)),
        q=lambda x: dispatch(inner.q, outer.q, x, ()),
    )


def cloak_field(epsilon: float, target: MaterialField) -> MaterialField:
    shell = push_forward(reg_cloak_map(epsilon), isotropic_field(1.0, 1.0))
    return piecewise_radial_field(INTERFACE_RADIUS, target, shell)


def run_cloak(
    exp: CloakExperiment, mesh: Mesh | None = None
) -> tuple[DtNMatrix, SweepRecord]:
    """One cloak experiment: returns the computed DtN matrix and its
    relative error against the free-space operator."""
    mesh = mesh if mesh is not None else cloak_mesh(exp.epsilon, exp.mesh_h)
    field = cloak_field(exp.epsilon, exp.target)
    t0 = time.perf_counter()
    computed = dtn_matrix(mesh, field, exp.omega, exp.modes, f=exp.source)
    elapsed = time.perf_counter() - t0
    free = dtn_free_analytic(exp.omega, exp.modes, OUTER_RADIUS)
    record = SweepRecord(
        epsilon=exp.epsilon,
        dtn_error_value=dtn_error(computed, free),
        dofs=len(mesh.nodes),
        factorization_seconds=elapsed,
    )
    return computed, record


def run_sweep(
    eps_values,
    omega: float,
    target: MaterialField,
    source: Callable | None = None,
    modes: int = 8,
    mesh_h: float = 0.05,
) -> tuple[list[SweepRecord], list[DtNMatrix]]:
    """Independent experiments per epsilon, results ordered by epsilon as given."""
    records, matrices = [], []
    for eps in eps_values:
        exp = CloakExperiment(
            epsilon=eps,
            omega=omega,
            target=target,
            source=source,
            modes=modes,
            mesh_h=mesh_h,
        )
        mat, rec = run_cloak(exp)
        records.append(rec)
        matrices.append(mat)
    return records, matrices


def sweep_to_csv(records: list[SweepRecord], omega: float, modes: int, path: str):
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "dtn_error", "dofs", "omega", "modes"])
            for rec in records:
                writer.writerow(
                    [repr(rec.epsilon), repr(rec.dtn_error_value), rec.dofs,
                     repr(float(omega)), modes]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- interior resonance interplay -------------------------------------------


def resonant_frequency(q_a: float) -> float:
    """First interior resonance of the unit disk with (I, q_a): the radial
    and both first-order angular branches meet at j_{1,1}/sqrt(q_a)."""
    return bessel.bessel_root(1, 1) / math.sqrt(q_a)


def radial_resonance_source(q_a: float) -> Callable:
    """The radial resonance eigenfunction J_0(j_{1,1} |x|) of (I, q_a),
    usable as a cloak-breaking source on the unit disk."""
    j11 = bessel.bessel_root(1, 1)
    j0 = np.vectorize(lambda r: bessel.bessel_j(0, r))

    def f(x):
        x = np.asarray(x, dtype=float)
        return j0(j11 * np.hypot(x[..., 0], x[..., 1]))

    return f


def source_projection(
    sys: AssembledSystem, f: Callable, basis_vectors: np.ndarray
) -> tuple[float, float]:
    """Split a source into its components inside and orthogonal to the
    span of resonance eigenvectors, in the q-weighted L2 inner product.

    Returns the two component norms; an empty basis yields (0, ||f||).
    """
    nodes = sys.mesh.nodes
    f_vec = np.asarray(f(nodes), dtype=float)
    M = sys.mass
    norm_f = math.sqrt(float(f_vec @ (M @ f_vec)))
    if basis_vectors is None or basis_vectors.size == 0:
        return 0.0, norm_f
    V = np.atleast_2d(basis_vectors)
    if V.shape[0] != len(nodes):
        V = V.T
    G = V.T @ (M @ V)
    coef = np.linalg.solve(G, V.T @ (M @ f_vec))
    proj = V @ coef
    comp_in = math.sqrt(max(float(proj @ (M @ proj)), 0.0))
    resid = f_vec - proj
    comp_out = math.sqrt(max(float(resid @ (M @ resid)), 0.0))
    return comp_in, comp_out
