"""Truncated Dirichlet-to-Neumann operators on a circular outer boundary.

The operator is expressed in the L2-orthonormal real trigonometric basis
{1/sqrt(2 pi R), cos(n t)/sqrt(pi R), sin(n t)/sqrt(pi R)} on the
radius-R boundary circle, so operator norms are basis-independent at a
fixed truncation order.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import bessel
from .errors import ParameterError, ResonanceError
from .fem import AssembledSystem, assemble, boundary_flux, factorize_interior, solve_dirichlet
from .meshgen import Mesh
from .xform import MaterialField


@dataclass
class DtNMatrix:
    omega: float
    modes: int
    radius: float
    entries: np.ndarray    # (2N+1, 2N+1), basis order [1, cos 1, sin 1, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "omega": self.omega,
                "modes": self.modes,
                "radius": self.radius,
                "entries": [list(map(float, row)) for row in self.entries],
            }
        )

    def save(self, path: str) -> None:
        fd, tmp = tempfile.mkstemp(
            dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(self.to_json())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_json(cls, text: str) -> "DtNMatrix":
        data = json.loads(text)
        return cls(
            omega=float(data["omega"]),
            modes=int(data["modes"]),
            radius=float(data["radius"]),
            entries=np.array(data["entries"], dtype=float),
        )


def basis_values(angles: np.ndarray, modes: int, radius: float) -> np.ndarray:
    """Rows of the (2N+1, n_nodes) table of basis values at given angles."""
    out = np.empty((2 * modes + 1, len(angles)))
    out[0] = 1.0 / math.sqrt(2 * math.pi * radius)
    for n in range(1, modes + 1):
        out[2 * n - 1] = np.cos(n * angles) / math.sqrt(math.pi * radius)
        out[2 * n] = np.sin(n * angles) / math.sqrt(math.pi * radius)
    return out


def dtn_matrix(
    mesh: Mesh,
    m: MaterialField,
    omega: float,
    modes: int,
    f=None,
    sys: AssembledSystem | None = None,
) -> DtNMatrix:
    """DtN matrix by 2N+1 Dirichlet solves sharing one factorization.

    Each basis trace is interpolated at the boundary nodes, the interior
    problem solved at lambda = omega^2, and the recovered nodal flux is
    projected back onto the basis with trapezoidal quadrature over the
    ring (whose weights are exactly the lumped boundary mass, which makes
    the projected matrix symmetric to solver roundoff).
    """
    ring = mesh.outer_boundary
    if len(ring) < 8 * modes:
        raise ParameterError(
            f"outer ring of {len(ring)} nodes cannot resolve {modes} modes "
            f"(need at least {8 * modes})"
        )
    pts = mesh.nodes[ring]
    radius = float(np.hypot(pts[:, 0], pts[:, 1]).mean())
    angles = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)

    system = sys if sys is not None else assemble(mesh, m, f=f)
    lam = omega**2
    fact = factorize_interior(system, lam)

    psi = basis_values(angles, modes, radius)
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    weights = 0.5 * (seg + np.roll(seg, 1))

    dim = 2 * modes + 1
    entries = np.empty((dim, dim))
    for k in range(dim):
        u = solve_dirichlet(system, psi[k], lam, factorization=fact)
        flux = boundary_flux(system, u, lam)
        entries[:, k] = psi @ (weights * flux)

    return DtNMatrix(omega=omega, modes=modes, radius=radius, entries=entries)


def dtn_free_analytic(omega: float, modes: int, radius: float) -> DtNMatrix:
    """Free-space DtN on the radius-R circle: diagonal with
    omega J_n'(omega R)/J_n(omega R) per Fourier order n (cos and sin)."""
    x = omega * radius
    dim = 2 * modes + 1
    entries = np.zeros((dim, dim))
    for n in range(modes + 1):
        jn = bessel.bessel_j(n, x)
        if abs(jn) <= 1e-8:
            raise ResonanceError(
                f"J_{n}({x}) = {jn:.2e} vanishes: omega is an interior "
                f"Dirichlet resonance of the free disk"
            )
        d = omega * bessel.bessel_j_prime(n, x) / jn
        if n == 0:
            entries[0, 0] = d
        else:
            entries[2 * n - 1, 2 * n - 1] = d
            entries[2 * n, 2 * n] = d
    return DtNMatrix(omega=omega, modes=modes, radius=radius, entries=entries)


def dtn_error(A: DtNMatrix, B: DtNMatrix) -> float:
    """Relative spectral-norm distance ||A - B|| / ||B||."""
    if (A.omega, A.modes) != (B.omega, B.modes) or abs(A.radius - B.radius) > 1e-9:
        raise ParameterError("DtN matrices have mismatched omega/modes/radius")
    return float(
        np.linalg.norm(A.entries - B.entries, 2) / np.linalg.norm(B.entries, 2)
    )
