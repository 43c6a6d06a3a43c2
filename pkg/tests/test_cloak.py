import numpy as np
import pytest

from helmcloak import bessel, cloak, dtn, fem, meshgen, spectra, xform
from helmcloak.errors import ParameterError


def test_cloak_mesh_geometry():
    mesh = cloak.cloak_mesh(epsilon=0.2, h=0.1)
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    assert r.max() == pytest.approx(2.0, abs=1e-12)
    on_interface = np.abs(r - 1.0) < 0.02
    assert on_interface.any()
    assert np.max(np.abs(r[on_interface] - 1.0)) <= 1e-12
    assert mesh.min_angle() >= 20.0
    assert np.all(mesh.signed_areas() > 0)


def test_cloak_mesh_grading_near_interface():
    mesh = cloak.cloak_mesh(epsilon=0.1, h=0.1)
    ring_radii = np.unique(np.round(np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1]), 12))
    idx = int(np.argmin(np.abs(ring_radii - 1.0)))
    gap_below = ring_radii[idx] - ring_radii[idx - 1]
    gap_above = ring_radii[idx + 1] - ring_radii[idx]
    assert gap_below <= 0.1 / 4 + 1e-12
    assert gap_above <= 0.1 / 4 + 1e-12


def test_piecewise_field_dispatch():
    inner = xform.isotropic_field(1.0, 4.0)
    outer = xform.isotropic_field(2.0, 1.0)
    f = cloak.piecewise_radial_field(1.0, inner, outer)
    pts = np.array([[0.5, 0.0], [1.5, 0.0]])
    g = f.g(pts)
    assert g[0, 0, 0] == 1.0 and g[1, 0, 0] == 2.0
    assert f.q(pts)[0] == 4.0 and f.q(pts)[1] == 1.0


def test_cloak_field_matches_free_at_identity_epsilon():
    field = cloak.cloak_field(1.0, xform.isotropic_field(1.0, 1.0))
    pts = np.array([[1.5, 0.2], [0.3, 0.1], [-1.1, 0.9]])
    assert np.allclose(field.g(pts), np.broadcast_to(np.eye(2), (3, 2, 2)))
    assert np.allclose(field.q(pts), 1.0)


def test_run_cloak_identity_epsilon_equals_discretization_floor():
    # at epsilon = 1 the shell is the trivial medium, so the only error is
    # the FEM discretization error of the free problem
    exp = cloak.CloakExperiment(
        epsilon=1.0,
        omega=1.0,
        target=xform.isotropic_field(1.0, 1.0),
        modes=4,
        mesh_h=0.1,
    )
    _, rec = cloak.run_cloak(exp)
    assert rec.dtn_error_value < 0.01


def test_sweep_errors_decrease_with_epsilon():
    records, matrices = cloak.run_sweep(
        [0.8, 0.4, 0.2],
        omega=1.0,
        target=xform.isotropic_field(3.0, 2.0),
        modes=4,
        mesh_h=0.1,
    )
    errs = [r.dtn_error_value for r in records]
    assert errs[0] > errs[1] > errs[2]
    assert len(matrices) == 3
    assert all(m.radius == pytest.approx(2.0, abs=1e-9) for m in matrices)


def test_sweep_csv_format(tmp_path):
    recs = [
        cloak.SweepRecord(0.5, 0.123, 400, 0.01),
        cloak.SweepRecord(0.25, 0.045, 900, 0.02),
    ]
    path = tmp_path / "sweep.csv"
    cloak.sweep_to_csv(recs, omega=1.0, modes=8, path=str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epsilon,dtn_error,dofs,omega,modes"
    first = lines[1].split(",")
    assert float(first[0]) == 0.5
    assert float(first[1]) == 0.123
    assert int(first[2]) == 400
    assert float(first[3]) == 1.0
    assert int(first[4]) == 8


def test_sweep_csv_deterministic(tmp_path):
    recs = [cloak.SweepRecord(0.5, 0.1 + 1e-17, 100, 0.0)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cloak.sweep_to_csv(recs, 1.0, 4, str(a))
    cloak.sweep_to_csv(recs, 1.0, 4, str(b))
    assert a.read_bytes() == b.read_bytes()


def test_experiment_validation():
    free = xform.isotropic_field(1.0, 1.0)
    with pytest.raises(ParameterError):
        cloak.CloakExperiment(epsilon=0.0, omega=1.0, target=free)
    with pytest.raises(ParameterError):
        cloak.CloakExperiment(epsilon=1.5, omega=1.0, target=free)
    with pytest.raises(ParameterError):
        cloak.CloakExperiment(epsilon=0.5, omega=1.0, target=free, modes=0)


def test_resonant_frequency_value():
    assert cloak.resonant_frequency(4.0) == pytest.approx(
        bessel.bessel_root(1, 1) / 2.0, abs=1e-12
    )


def test_radial_resonance_source_values():
    f = cloak.radial_resonance_source(4.0)
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    vals = f(pts)
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    # the source is the radial resonance mode; it vanishes nowhere special
    # at r=1 except J0(j_{1,1}) which is the mode's boundary value
    assert vals[1] == pytest.approx(
        bessel.bessel_j(0, bessel.bessel_root(1, 1)), abs=1e-12
    )


def test_source_projection_splits_orthogonally():
    mesh = meshgen.make_disk(1.0, 0.08)
    medium = xform.isotropic_field(1.0, 4.0)
    sys = fem.assemble(mesh, medium)
    res = spectra.resonance_eigs(mesh, medium, count=4)
    nonzero = res.values > 1e-8
    basis = res.vectors[:, nonzero]

    f = cloak.radial_resonance_source(4.0)
    comp_in, comp_out = cloak.source_projection(sys, f, basis)
    nodes = mesh.nodes
    f_vec = f(nodes)
    norm_f = np.sqrt(float(f_vec @ (sys.mass @ f_vec)))
    # resonant source lies almost entirely in the resonance eigenspace
    assert comp_in / norm_f > 0.99
    assert np.hypot(comp_in, comp_out) == pytest.approx(norm_f, rel=1e-8)

    # empty basis convention
    zero_in, full = cloak.source_projection(sys, f, np.empty((len(nodes), 0)))
    assert zero_in == 0.0
    assert full == pytest.approx(norm_f, rel=1e-12)


def test_run_cloak_rejects_free_resonance():
    # omega hitting a Dirichlet resonance of the radius-2 free disk has no
    # free DtN reference
    from helmcloak.errors import ResonanceError

    exp = cloak.CloakExperiment(
        epsilon=0.5,
        omega=bessel.bessel_root(0, 1) / 2.0,
        target=xform.isotropic_field(1.0, 1.0),
        modes=2,
        mesh_h=0.1,
    )
    with pytest.raises(ResonanceError):
        cloak.run_cloak(exp)
