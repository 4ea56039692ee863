"""Field evaluation: multipole sums, quadrature cross-check, far field."""

import numpy as np
import pytest

from memscat import (
    Cylinder,
    InteriorPointError,
    PlaneWave,
    PointSource,
    Scene,
    assemble_system,
    boundary_residual,
    far_field_amplitude,
    scattered_field,
    solve,
    total_field,
)
from memscat.assembly import CoefficientVector
from memscat.field import (
    incident_field,
    interior_mask,
    single_layer_field_quadrature,
    total_field_grid,
    write_field_csv,
    write_plot_script,
)


@pytest.fixture(scope="module")
def single_solution():
    sc = Scene((Cylinder((0.0, 0.0), 1.0),), 0.6, PointSource((-20.0, -25.0)))
    op, rhs = assemble_system(sc, 12)
    return sc, solve(op, rhs).solution


@pytest.fixture(scope="module")
def far_phi(far_scene):
    op, rhs = assemble_system(far_scene, 13)
    return solve(op, rhs).solution


def exterior_cloud(scene, n, seed=7, box=30.0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(4 * n, 2))
    pts = pts[~interior_mask(scene, pts)]
    return pts[:n]


class TestIncidentField:
    def test_plane_wave_values(self):
        sc = Scene((Cylinder((5.0, 5.0), 1.0),), 2.0, PlaneWave(0.0))
        pts = np.array([[0.0, 0.0], [1.0, 3.0], [-0.25, 0.5]])
        u = incident_field(sc, pts)
        assert np.allclose(u, np.exp(2.0j * pts[:, 0]), rtol=1e-14)

    def test_point_source_is_radially_symmetric(self):
        sc = Scene((Cylinder((40.0, 0.0), 1.0),), 0.9, PointSource((1.0, 2.0)))
        a = incident_field(sc, np.array([[4.0, 6.0]]))[0]
        b = incident_field(sc, np.array([[-2.0, -2.0]]))[0]
        assert a == pytest.approx(b, rel=1e-13)

    def test_total_is_incident_plus_scattered(self, far_scene, far_phi):
        pts = exterior_cloud(far_scene, 10)
        direct = total_field(far_scene, far_phi, pts)
        split = (incident_field(far_scene, pts)
                 + scattered_field(far_scene, far_phi, pts))
        assert np.allclose(direct, split, rtol=0, atol=1e-15)


class TestScatteredField:
    def test_zero_coefficients_give_zero_field(self, far_scene):
        phi = CoefficientVector.zeros(3, 5)
        pts = exterior_cloud(far_scene, 8)
        assert np.all(scattered_field(far_scene, phi, pts) == 0.0)

    def test_matches_quadrature_route(self, far_scene, far_phi):
        pts = exterior_cloud(far_scene, 20)
        u_multipole = scattered_field(far_scene, far_phi, pts)
        u_quadrature = single_layer_field_quadrature(far_scene, far_phi, pts,
                                                     n_quad=512)
        assert np.max(np.abs(u_multipole - u_quadrature)) < 1e-8

    def test_quadrature_resolution_stability(self, far_scene, far_phi):
        pts = exterior_cloud(far_scene, 6)
        u1 = single_layer_field_quadrature(far_scene, far_phi, pts, n_quad=256)
        u2 = single_layer_field_quadrature(far_scene, far_phi, pts, n_quad=512)
        assert np.max(np.abs(u1 - u2)) < 1e-10

    def test_linearity_in_the_coefficients(self, far_scene, far_phi):
        pts = exterior_cloud(far_scene, 8)
        c = 1.3 - 0.4j
        scaled = CoefficientVector(c * far_phi.data)
        assert np.allclose(scattered_field(far_scene, scaled, pts),
                           c * scattered_field(far_scene, far_phi, pts),
                           rtol=1e-13)

    def test_interior_points_are_rejected(self, far_scene, far_phi):
        with pytest.raises(InteriorPointError):
            scattered_field(far_scene, far_phi, np.array([[0.0, 0.0]]))

    def test_mirror_symmetric_scene(self):
        # Axis-aligned pair hit along the axis: the field must be symmetric
        # under y -> -y.
        sc = Scene((Cylinder((0.0, 0.0), 1.0), Cylinder((4.0, 0.0), 1.0)),
                   0.6, PlaneWave(0.0))
        op, rhs = assemble_system(sc, 10)
        phi = solve(op, rhs).solution
        upper = np.array([[1.0, 2.5], [3.3, 1.7], [-2.0, 0.4]])
        lower = upper * np.array([1.0, -1.0])
        assert np.max(np.abs(scattered_field(sc, phi, upper)
                             - scattered_field(sc, phi, lower))) < 1e-9


class TestBoundaryResidual:
    def test_residual_drops_fast_with_truncation(self, far_scene):
        values = {}
        for n in (3, 13):
            op, rhs = assemble_system(far_scene, n)
            phi = solve(op, rhs).solution
            values[n] = boundary_residual(far_scene, phi)
        assert values[3] / values[13] >= 100.0

    def test_single_cylinder_residual_is_tiny(self, single_solution):
        # Evaluated on the boundary itself the Dirichlet defect sits at
        # machine level; the default standoff adds an O(offset) floor, so
        # this check pins both readings.
        sc, phi = single_solution
        assert boundary_residual(sc, phi, offset=0.0) < 1e-8
        assert boundary_residual(sc, phi) < 5e-7

    def test_residual_decreases_monotonically(self, far_scene):
        values = []
        for n in (4, 6, 8, 10, 12):
            op, rhs = assemble_system(far_scene, n)
            phi = solve(op, rhs).solution
            values.append(boundary_residual(far_scene, phi, offset=0.0))
        for lo, hi in zip(values[1:], values[:-1]):
            assert lo <= hi * 1.05

    def test_per_cylinder_selection(self, far_scene, far_phi):
        worst = boundary_residual(far_scene, far_phi)
        singles = [boundary_residual(far_scene, far_phi, p=p)
                   for p in range(3)]
        assert worst == pytest.approx(max(singles), rel=1e-12)


class TestFarField:
    def test_sqrt_r_scaling_matches_the_amplitude(self, single_solution):
        sc, phi = single_solution
        angles = np.linspace(0.0, 2.0 * np.pi, 13)[:-1]
        F = np.abs(far_field_amplitude(sc, phi, angles))
        for r in (100.0, 400.0):
            pts = np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)
            u = np.abs(scattered_field(sc, phi, pts)) * np.sqrt(r)
            assert np.max(np.abs(u / F - 1.0)) < 0.01

    def test_ray_constancy(self, single_solution):
        sc, phi = single_solution
        theta = 0.7
        readings = []
        for r in (100.0, 200.0, 400.0):
            x = np.array([[r * np.cos(theta), r * np.sin(theta)]])
            readings.append(abs(scattered_field(sc, phi, x)[0]) * np.sqrt(r))
        assert max(readings) / min(readings) < 1.01

    def test_linearity(self, single_solution):
        sc, phi = single_solution
        angles = np.array([0.3, 2.0])
        c = 2.0j
        scaled = CoefficientVector(c * phi.data)
        assert np.allclose(far_field_amplitude(sc, scaled, angles),
                           c * far_field_amplitude(sc, phi, angles),
                           rtol=1e-13)

    def test_mirror_symmetry_of_the_pattern(self):
        sc = Scene((Cylinder((0.0, 0.0), 1.0), Cylinder((4.0, 0.0), 1.0)),
                   0.6, PlaneWave(0.0))
        op, rhs = assemble_system(sc, 10)
        phi = solve(op, rhs).solution
        up = far_field_amplitude(sc, phi, np.array([0.9, 2.2]))
        down = far_field_amplitude(sc, phi, np.array([-0.9, -2.2]))
        assert np.allclose(up, down, rtol=1e-10)


class TestGrid:
    def test_interior_samples_are_masked(self, far_scene, far_phi):
        X, Y, U, inside = total_field_grid(far_scene, far_phi,
                                           (-3.0, 3.0), (-3.0, 3.0), 5, 5)
        assert inside[2, 2]
        assert np.isnan(U[2, 2].real)
        assert not inside[0, 0]
        assert np.isfinite(U[0, 0])

    def test_single_point_grid_matches_direct_evaluation(self, far_scene,
                                                         far_phi):
        X, Y, U, inside = total_field_grid(far_scene, far_phi,
                                           (7.0, 7.0), (-3.0, -3.0), 1, 1)
        direct = total_field(far_scene, far_phi, np.array([[7.0, -3.0]]))[0]
        assert not inside[0, 0]
        assert U[0, 0] == pytest.approx(direct, rel=1e-14)

    def test_grid_axes_orientation(self, far_scene, far_phi):
        X, Y, U, inside = total_field_grid(far_scene, far_phi,
                                           (-2.0, 2.0), (5.0, 6.0), 3, 2)
        assert X.shape == (2, 3)
        assert np.allclose(X[0], [-2.0, 0.0, 2.0])
        assert np.allclose(Y[:, 0], [5.0, 6.0])

    def test_csv_schema(self, tmp_path, far_scene, far_phi):
        X, Y, U, inside = total_field_grid(far_scene, far_phi,
                                           (-3.0, 3.0), (-3.0, 3.0), 3, 3)
        path = tmp_path / "field.csv"
        write_field_csv(path, X, Y, U, inside)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,re_total,im_total,abs_total,inside"
        assert len(lines) == 10
        center = lines[5].split(",")
        assert center[2] == "nan" and center[5] == "1"
        corner = lines[1].split(",")
        assert corner[5] == "0" and np.isfinite(float(corner[2]))

    def test_plot_script_references_the_csv(self, tmp_path):
        path = tmp_path / "field.gp"
        write_plot_script(path, "field.csv")
        text = path.read_text()
        assert "field.csv" in text
        assert "splot" in text


class TestInteriorMask:
    def test_margin_is_tight(self, far_scene):
        # Points just outside the disk count as exterior; just inside, not.
        assert not interior_mask(far_scene, np.array([[2.1, 0.0]]))[0]
        assert interior_mask(far_scene, np.array([[1.9, 0.0]]))[0]

    def test_accepts_single_point(self, far_scene):
        assert interior_mask(far_scene, [0.0, 0.0])[0]
