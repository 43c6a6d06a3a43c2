import numpy as np
import pytest

from helmcloak import xform
from helmcloak.errors import DomainError, ParameterError


def sample_annulus(rng, n, r_lo, r_hi):
    r = rng.uniform(r_lo, r_hi, n)
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def fd_jacobian(F, x, h=1e-6):
    out = np.empty(x.shape + (2,))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        out[..., :, k] = (F.map(x + e) - F.map(x - e)) / (2 * h)
    return out


# -- cloak map --------------------------------------------------------------


def test_cloak_map_point_values():
    F = xform.cloak_map()
    assert np.allclose(F([1.0, 0.0]), [1.5, 0.0])
    assert np.allclose(F([0.0, 2.0]), [0.0, 2.0])
    assert np.allclose(F([1e-9, 0.0]), [1.0, 0.0], atol=1e-8)


def test_cloak_pushforward_values_on_middle_circle():
    # eigenvalues of the pushed tensor at |y| = 1.5 are (|y|-1)/|y| and
    # |y|/(|y|-1), and the pushed density is 4(|y|-1)/|y|
    field = xform.push_forward(xform.cloak_map(), xform.isotropic_field(1.0, 1.0))
    y = np.array([1.5, 0.0])
    g = field.g(y)
    eigs = np.sort(np.linalg.eigvalsh(g))
    assert eigs[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert eigs[1] == pytest.approx(3.0, abs=1e-12)
    assert field.q(y) == pytest.approx(4.0 / 3.0, abs=1e-12)
    # radial direction carries the small eigenvalue
    assert g[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_cloak_pushforward_unit_determinant(rng):
    field = xform.push_forward(xform.cloak_map(), xform.isotropic_field(1.0, 1.0))
    y = sample_annulus(rng, 50, 1.05, 1.95)
    dets = np.linalg.det(field.g(y))
    assert np.allclose(dets, 1.0, atol=1e-10)


def test_cloak_degenerates_at_inner_interface():
    field = xform.push_forward(xform.cloak_map(), xform.isotropic_field(1.0, 1.0))
    y = np.array([1.0 + 1e-4, 0.0])
    eigs = np.sort(np.linalg.eigvalsh(field.g(y)))
    assert eigs[0] < 1e-3
    assert eigs[1] > 1e3


def test_regularized_cloak_endpoints_and_identity():
    F = xform.reg_cloak_map(0.3)
    assert np.allclose(F([0.3, 0.0]), [1.0, 0.0])
    assert np.allclose(F([0.0, 2.0]), [0.0, 2.0])
    Fid = xform.reg_cloak_map(1.0)
    pts = np.array([[1.0, 0.7], [1.9, 0.1], [-1.2, 0.4]])
    assert np.array_equal(Fid.map(pts), pts)


def test_regularized_cloak_converges_to_singular_cloak():
    F = xform.cloak_map()
    r = np.linspace(0.4, 2.0, 40)
    pts = np.stack([r, np.zeros_like(r)], axis=-1)
    sups = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        Fe = xform.reg_cloak_map(eps)
        sups.append(np.max(np.abs(Fe.map(pts) - F.map(pts))))
    assert all(a > b for a, b in zip(sups, sups[1:]))
    assert sups[-1] < 0.06


# -- inversion --------------------------------------------------------------


def test_inversion_is_involution(rng):
    F = xform.inversion_map()
    x = sample_annulus(rng, 100, 0.2, 3.0)
    assert np.max(np.abs(F.map(F.map(x)) - x)) < 1e-12


def test_inversion_preserves_identity_material(rng):
    field = xform.push_forward(xform.inversion_map(), xform.isotropic_field(1.0, 1.0))
    x = sample_annulus(rng, 30, 0.3, 2.0)
    g = field.g(x)
    eye = np.broadcast_to(np.eye(2), g.shape)
    assert np.max(np.abs(g - eye)) < 1e-12


def test_inversion_rejects_origin():
    with pytest.raises(DomainError):
        xform.inversion_map().map(np.array([0.0, 0.0]))


# -- generic map laws -------------------------------------------------------

ALL_MAPS = [
    xform.identity_map(),
    xform.scaling_map(1.7),
    xform.cloak_map(),
    xform.reg_cloak_map(0.25),
    xform.inversion_map(),
    xform.bump_diffeo(0.15, 1),
]


@pytest.mark.parametrize("F", ALL_MAPS, ids=lambda F: F.name)
def test_inverse_round_trip(F, rng):
    x = sample_annulus(rng, 120, 0.3, 1.9)
    assert np.all(F.domain_check(x))
    assert np.max(np.abs(F.inverse(F.map(x)) - x)) < 1e-9


@pytest.mark.parametrize("F", ALL_MAPS, ids=lambda F: F.name)
def test_jacobian_matches_finite_differences(F, rng):
    x = sample_annulus(rng, 40, 0.3, 1.7)
    assert np.max(np.abs(F.jacobian(x) - fd_jacobian(F, x))) < 1e-6


def test_pushforward_functoriality(rng):
    # (G after F)_* m == G_*(F_* m)
    F = xform.reg_cloak_map(0.5)
    G = xform.bump_diffeo(0.1, 7)
    m = xform.isotropic_field(2.0, 3.0)
    via_compose = xform.push_forward(xform.compose(G, F), m)
    via_steps = xform.push_forward(G, xform.push_forward(F, m))
    y = sample_annulus(rng, 40, 1.05, 1.9)
    assert np.max(np.abs(via_compose.g(y) - via_steps.g(y))) < 1e-9
    assert np.max(np.abs(via_compose.q(y) - via_steps.q(y))) < 1e-9


# -- bump maps --------------------------------------------------------------


def test_bump_fixes_far_field(rng):
    F = xform.bump_diffeo(0.2, 3)
    x = sample_annulus(rng, 50, 1.8, 3.0)
    assert np.array_equal(F.map(x), x)


def test_bump_jacobian_determinant_bounded_below():
    F = xform.bump_diffeo(0.2, 5)
    grid = np.linspace(-1.8, 1.8, 161)
    pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1)
    dets = np.linalg.det(F.jacobian(pts))
    assert dets.min() > 0.5


def test_bump_seeds_differ():
    a = xform.bump_diffeo(0.15, 1)
    b = xform.bump_diffeo(0.15, 2)
    x = np.array([[0.3, 0.4], [0.9, -0.2]])
    assert not np.allclose(a.map(x), b.map(x))


def test_bump_is_deterministic():
    x = np.array([[0.3, 0.4], [0.9, -0.2]])
    assert np.array_equal(
        xform.bump_diffeo(0.15, 9).map(x), xform.bump_diffeo(0.15, 9).map(x)
    )


def test_unit_disk_bump_fixes_boundary_collar(rng):
    F = xform.unit_disk_bump(0.15, 1)
    x = sample_annulus(rng, 50, 0.9, 1.0)
    assert np.max(np.abs(F.map(x) - x)) < 1e-15
    inside = sample_annulus(rng, 200, 0.05, 0.999)
    r = np.hypot(*F.map(inside).T)
    assert np.all(r <= 1.0 + 1e-12)


def test_bump_amplitude_range_error():
    with pytest.raises(ParameterError):
        xform.bump_diffeo(0.25, 1)


# -- registry ---------------------------------------------------------------


def test_lookup_registry():
    assert xform.lookup("identity").name == "identity"
    assert xform.lookup("cloak").name == "cloak"
    assert xform.lookup("inversion").name == "inversion"
    assert xform.lookup("regcloak:0.5").name == "regcloak:0.5"
    F = xform.lookup("bump:0.1:4")
    assert np.allclose(F.map([0.2, 0.3]), xform.bump_diffeo(0.1, 4).map([0.2, 0.3]))
    with pytest.raises(ParameterError):
        xform.lookup("nope")
    with pytest.raises(ParameterError):
        xform.lookup("regcloak:1.5")
    with pytest.raises(ParameterError):
        xform.lookup("bump:0.1")


def test_tensor_field_validation():
    with pytest.raises(ParameterError):
        xform.tensor_field([[1.0, 0.5], [0.2, 1.0]], 1.0)
    f = xform.tensor_field([[2.0, 0.3], [0.3, 1.0]], 4.0)
    assert f.upper_ellipticity >= 4.0
