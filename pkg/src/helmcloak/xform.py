"""Diffeomorphisms and the push-forward of material coefficients.

A DiffeoSpec bundles a planar map with its closed-form Jacobian, inverse
and domain predicate.  All callables are vectorized over leading axes:
points have shape (..., 2), Jacobians (..., 2, 2).  MaterialField carries
the coefficient pair (g, q) of the anisotropic Helmholtz operator
div(g grad u) + lambda q u as evaluation closures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError


def _as_points(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape[-1] != 2:
        raise ParameterError("points must have trailing dimension 2")
    return p


@dataclass(frozen=True)
class DiffeoSpec:
    name: str
    map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    domain_check: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.map(_as_points(x))


@dataclass(frozen=True)
class MaterialField:
    g: Callable[[np.ndarray], np.ndarray]   # (..., 2) -> (..., 2, 2), symmetric
    q: Callable[[np.ndarray], np.ndarray]   # (..., 2) -> (...)
    lower_ellipticity: float = 0.0
    upper_ellipticity: float = math.inf


def isotropic_field(c: float = 1.0, q: float = 1.0) -> MaterialField:
    """Constant isotropic medium g = c*I, q = const."""

    def g_eval(x):
        x = _as_points(x)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        return out

    def q_eval(x):
        return np.full(_as_points(x).shape[:-1], float(q))

    lo, hi = min(c, q), max(c, q)
    return MaterialField(g=g_eval, q=q_eval, lower_ellipticity=lo, upper_ellipticity=hi)


def tensor_field(gmat, q: float) -> MaterialField:
    """Constant anisotropic medium with fixed symmetric 2x2 tensor."""
    gmat = np.asarray(gmat, dtype=float)
    if gmat.shape != (2, 2) or abs(gmat[0, 1] - gmat[1, 0]) > 1e-12:
        raise ParameterError("g must be a symmetric 2x2 matrix")
    eigs = np.linalg.eigvalsh(gmat)

    def g_eval(x):
        x = _as_points(x)
        return np.broadcast_to(gmat, x.shape[:-1] + (2, 2)).copy()

    def q_eval(x):
        return np.full(_as_points(x).shape[:-1], float(q))

    return MaterialField(
        g=g_eval,
        q=q_eval,
        lower_ellipticity=float(min(eigs.min(), q)),
        upper_ellipticity=float(max(eigs.max(), q)),
    )


def push_forward(F: DiffeoSpec, m: MaterialField) -> MaterialField:
    """Coefficient transport under F.

    At a target point y with x = F^{-1}(y):
        (F_* g)(y) = DF(x) g(x) DF(x)^T / |det DF(x)|
        (F_* q)(y) = q(x) / |det DF(x)|
    The tensor result is explicitly symmetrized to kill roundoff asymmetry.
    """

    def pulled(y):
        y = _as_points(y)
        x = F.inverse(y)
        J = F.jacobian(x)
        det = np.abs(J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0])
        if np.any(det == 0.0):
            raise DomainError(f"singular Jacobian of {F.name} at a requested point")
        return x, J, det

    def g_eval(y):
        x, J, det = pulled(y)
        gx = m.g(x)
        out = np.einsum("...ij,...jk,...lk->...il", J, gx, J) / det[..., None, None]
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def q_eval(y):
        x, _, det = pulled(y)
        return m.q(x) / det

    return MaterialField(g=g_eval, q=q_eval)


# -- concrete maps ---------------------------------------------------------


def _radial_spec(name, rho, rho_prime, rho_inv, r_lo, r_hi) -> DiffeoSpec:
    """Rotationally symmetric map x -> rho(|x|) x/|x| with affine-free plumbing.

    DF = rho'(r) P + (rho(r)/r)(I - P) with P the radial projector
    |x|^-2 x x^T, supplied in closed form.
    """

    def do_map(x):
        x = _as_points(x)
        r = np.hypot(x[..., 0], x[..., 1])
        _guard(r)
        return (rho(r) / r)[..., None] * x

    def do_inverse(y):
        y = _as_points(y)
        s = np.hypot(y[..., 0], y[..., 1])
        r = rho_inv(s)
        return (r / s)[..., None] * y

    def do_jacobian(x):
        x = _as_points(x)
        r = np.hypot(x[..., 0], x[..., 1])
        _guard(r)
        n = x / r[..., None]
        P = n[..., :, None] * n[..., None, :]
        eye = np.zeros(P.shape)
        eye[..., 0, 0] = 1.0
        eye[..., 1, 1] = 1.0
        return rho_prime(r)[..., None, None] * P + (rho(r) / r)[..., None, None] * (
            eye - P
        )

    def _guard(r):
        if np.any(r < r_lo - 1e-12) or np.any(r > r_hi + 1e-12):
            raise DomainError(f"point outside the domain of {name}")
        if np.any(r == 0.0):
            raise DomainError(f"{name} is undefined at the origin")

    def do_check(x):
        x = _as_points(x)
        r = np.hypot(x[..., 0], x[..., 1])
        return (r >= r_lo - 1e-12) & (r <= r_hi + 1e-12) & (r > 0)

    return DiffeoSpec(name, do_map, do_jacobian, do_inverse, do_check)


def identity_map() -> DiffeoSpec:
    def jac(x):
        x = _as_points(x)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        return out

    return DiffeoSpec(
        "identity",
        lambda x: _as_points(x).copy(),
        jac,
        lambda y: _as_points(y).copy(),
        lambda x: np.ones(_as_points(x).shape[:-1], dtype=bool),
    )


def scaling_map(c: float) -> DiffeoSpec:
    if c == 0:
        raise ParameterError("scale factor must be nonzero")

    def jac(x):
        x = _as_points(x)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        return out

    return DiffeoSpec(
        f"scale:{c}",
        lambda x: c * _as_points(x),
        jac,
        lambda y: _as_points(y) / c,
        lambda x: np.ones(_as_points(x).shape[:-1], dtype=bool),
    )


def cloak_map() -> DiffeoSpec:
    """Blow-up of the origin: x -> (1 + |x|/2) x/|x|, B_2\\{0} -> B_2\\B_1."""
    return _radial_spec(
        "cloak",
        rho=lambda r: 1.0 + 0.5 * r,
        rho_prime=lambda r: np.full(np.shape(r), 0.5),
        rho_inv=lambda s: 2.0 * (s - 1.0),
        r_lo=0.0,
        r_hi=2.0,
    )


def reg_cloak_map(eps: float) -> DiffeoSpec:
    """Regularized cloak map blowing B_eps up to B_1; identity when eps = 1."""
    if not (0.0 < eps <= 1.0):
        raise ParameterError(f"eps must lie in (0, 1], got {eps}")
    a = 2.0 * (1.0 - eps) / (2.0 - eps)
    slope = 1.0 / (2.0 - eps)
    return _radial_spec(
        f"regcloak:{eps}",
        rho=lambda r: a + slope * r,
        rho_prime=lambda r: np.full(np.shape(r), slope),
        rho_inv=lambda s: (s - a) / slope,
        r_lo=eps,
        r_hi=2.0,
    )


def inversion_map() -> DiffeoSpec:
    """Conformal inversion (x, y) -> (x, -y)/(x^2 + y^2); an involution."""

    def do_map(p):
        p = _as_points(p)
        r2 = p[..., 0] ** 2 + p[..., 1] ** 2
        if np.any(r2 == 0.0):
            raise DomainError("inversion is undefined at the origin")
        out = np.empty_like(p)
        out[..., 0] = p[..., 0] / r2
        out[..., 1] = -p[..., 1] / r2
        return out

    def do_jacobian(p):
        p = _as_points(p)
        x, y = p[..., 0], p[..., 1]
        r2 = x * x + y * y
        if np.any(r2 == 0.0):
            raise DomainError("inversion is undefined at the origin")
        out = np.empty(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = (y * y - x * x) / r2**2
        out[..., 0, 1] = -2 * x * y / r2**2
        out[..., 1, 0] = 2 * x * y / r2**2
        out[..., 1, 1] = (y * y - x * x) / r2**2
        return out

    def do_check(p):
        p = _as_points(p)
        return (p[..., 0] ** 2 + p[..., 1] ** 2) > 0

    return DiffeoSpec("inversion", do_map, do_jacobian, do_map, do_check)


def compose(G: DiffeoSpec, F: DiffeoSpec) -> DiffeoSpec:
    """G after F; Jacobian by the chain rule, inverse F^-1 after G^-1."""

    def do_jacobian(x):
        x = _as_points(x)
        return np.einsum("...ij,...jk->...ik", G.jacobian(F.map(x)), F.jacobian(x))

    return DiffeoSpec(
        f"{G.name}*{F.name}",
        lambda x: G.map(F.map(_as_points(x))),
        do_jacobian,
        lambda y: F.inverse(G.inverse(_as_points(y))),
        lambda x: F.domain_check(_as_points(x)) & G.domain_check(F.map(_as_points(x))),
    )


# -- seeded boundary-fixing bump maps --------------------------------------

_BUMP_RADIUS = 1.8
# Normalized so the sampled sup of the spectral norm of Db equals this;
# with |t| <= 0.2 the perturbation is a 0.24-contraction, so x + t b(x)
# is invertible and det(I + t Db) >= (1 - 0.24)^2 > 0.5.
_BUMP_DERIV_SUP = 1.2
_BUMP_T_MAX = 0.2


def _bump_field(seed: int):
    """Smooth vector field supported in |x| <= 1.8.

    Components are random combinations of the harmonic polynomials
    {1, x, y, x^2 - y^2, 2xy} (Fourier modes in angle times radial
    powers) under the C^2 radial window (1 - (r/1.8)^2)^3.
    """
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((2, 5))

    rho2 = _BUMP_RADIUS**2

    def basis(p):
        x, y = p[..., 0], p[..., 1]
        one = np.ones_like(x)
        return np.stack([one, x, y, x * x - y * y, 2 * x * y], axis=-1)

    def basis_grad(p):
        x, y = p[..., 0], p[..., 1]
        zero = np.zeros_like(x)
        one = np.ones_like(x)
        gx = np.stack([zero, one, zero, 2 * x, 2 * y], axis=-1)
        gy = np.stack([zero, zero, one, -2 * y, 2 * x], axis=-1)
        return gx, gy

    def window(p):
        r2 = p[..., 0] ** 2 + p[..., 1] ** 2
        s = np.clip(1.0 - r2 / rho2, 0.0, None)
        return s**3

    def window_grad(p):
        r2 = p[..., 0] ** 2 + p[..., 1] ** 2
        s = np.clip(1.0 - r2 / rho2, 0.0, None)
        fac = -6.0 * s**2 / rho2
        return fac * p[..., 0], fac * p[..., 1]

    def b(p):
        w = window(p)
        vals = basis(p) @ coef.T          # (..., 2)
        return w[..., None] * vals

    def db(p):
        w = window(p)
        wx, wy = window_grad(p)
        vals = basis(p) @ coef.T
        gx, gy = basis_grad(p)
        px = gx @ coef.T                  # d(vals)/dx
        py = gy @ coef.T
        out = np.empty(p.shape[:-1] + (2, 2))
        out[..., :, 0] = wx[..., None] * vals + w[..., None] * px
        out[..., :, 1] = wy[..., None] * vals + w[..., None] * py
        return out

    # normalize the sampled derivative sup
    grid = np.linspace(-_BUMP_RADIUS, _BUMP_RADIUS, 121)
    pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1)
    sup = np.linalg.norm(db(pts), ord=2, axis=(-2, -1)).max()
    scale = _BUMP_DERIV_SUP / sup

    return (lambda p: scale * b(p)), (lambda p: scale * db(p))


def bump_diffeo(t: float, seed: int) -> DiffeoSpec:
    """F(x) = x + t b(x) with a seeded smooth bump fixing |x| >= 1.8."""
    if abs(t) > _BUMP_T_MAX:
        raise ParameterError(f"|t| must be <= {_BUMP_T_MAX} for guaranteed invertibility")
    b, db = _bump_field(seed)

    def do_map(x):
        x = _as_points(x)
        return x + t * b(x)

    def do_jacobian(x):
        x = _as_points(x)
        out = t * db(x)
        out[..., 0, 0] += 1.0
        out[..., 1, 1] += 1.0
        return out

    def do_inverse(y):
        y = _as_points(y)
        x = y.copy()
        for _ in range(100):
            step = y - t * b(x)
            if np.max(np.abs(step - x)) < 1e-15:
                x = step
                break
            x = step
        return x

    return DiffeoSpec(
        f"bump:{t}:{seed}",
        do_map,
        do_jacobian,
        do_inverse,
        lambda x: np.ones(_as_points(x).shape[:-1], dtype=bool),
    )


def unit_disk_bump(t: float, seed: int) -> DiffeoSpec:
    """bump_diffeo conjugated by x -> x/2, so it maps B_1 into itself
    fixing a neighborhood of its boundary (|x| >= 0.9)."""
    return compose(scaling_map(0.5), compose(bump_diffeo(t, seed), scaling_map(2.0)))


def lookup(name: str) -> DiffeoSpec:
    """Resolve a registry name: identity, cloak, regcloak:<eps>,
    inversion, bump:<t>:<seed>."""
    if name == "identity":
        return identity_map()
    if name == "cloak":
        return cloak_map()
    if name == "inversion":
        return inversion_map()
    if name.startswith("regcloak:"):
        return reg_cloak_map(float(name.split(":", 1)[1]))
    if name.startswith("bump:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ParameterError("bump map name must be bump:<t>:<seed>")
        return bump_diffeo(float(parts[1]), int(parts[2]))
    raise ParameterError(f"unknown map name {name!r}")
