import numpy as np
import pytest

from costress.fields import make_polynomial
from costress.surfaces import (
    BoxFace,
    SphericalCap,
    stokes_flux_check,
    surface_divergence_check,
)


@pytest.fixture
def hemisphere():
    return SphericalCap(center=np.zeros(3), radius=1.0, axis=(0.0, 0.0, 1.0),
                        theta_max=np.pi / 2.0)


@pytest.fixture
def face():
    return BoxFace.unit_cube_face("z+")


def test_face_geometry(face):
    assert np.allclose(face.point(0.3, 0.7), [0.3, 0.7, 1.0])
    assert np.allclose(face.normal(0.5, 0.5), [0.0, 0.0, 1.0])
    # quadrature integrates the area exactly
    _, w = face.quadrature(4)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-14)


def test_unit_cube_faces_outward():
    for which, n in [("x+", [1, 0, 0]), ("x-", [-1, 0, 0]), ("y+", [0, 1, 0]),
                     ("y-", [0, -1, 0]), ("z+", [0, 0, 1]), ("z-", [0, 0, -1])]:
        f = BoxFace.unit_cube_face(which)
        assert np.allclose(f.normal(0.5, 0.5), n), which


def test_hemisphere_geometry(hemisphere):
    x = hemisphere.point(np.pi / 4, 0.0)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-14)
    n = hemisphere.normal(np.pi / 4, 0.0)
    assert np.allclose(n, x, atol=1e-14)  # radially outward
    _, w = hemisphere.quadrature(16)
    assert np.sum(w) == pytest.approx(2.0 * np.pi, abs=1e-10)


def test_frames_batch_matches_pointwise(hemisphere, face):
    for patch in (hemisphere, face):
        pts, _ = patch.quadrature(4)
        S = np.array([p[0] for p in pts])
        T = np.array([p[1] for p in pts])
        fb = patch.frames_batch(S, T)
        for i, (s, t) in enumerate(pts):
            fr = patch.frame(s, t)
            assert np.allclose(fb.x[i], fr.x, atol=1e-14)
            assert np.allclose(fb.n[i], fr.n, atol=1e-14)
            assert np.allclose(fb.g_inv[i], fr.g_inv, atol=1e-10)


def test_conormal_is_tangent_and_outward(hemisphere, face):
    nu = hemisphere.conormal("smax", np.pi / 2.0, 0.3)
    n = hemisphere.normal(np.pi / 2.0, 0.3)
    assert abs(nu @ n) <= 1e-13
    # at the equator of the upper hemisphere the conormal points down
    assert nu[2] == pytest.approx(-1.0, abs=1e-12)
    for side in face.edge_sides:
        nu = face.conormal(side, 0.5, 0.5)
        assert abs(nu @ face.normal(0.5, 0.5)) <= 1e-14
        assert np.linalg.norm(nu) == pytest.approx(1.0, abs=1e-14)


def test_stokes_rigid_rotation(hemisphere, face):
    # u = (-y, x, 0): curl = (0, 0, 2); hemisphere flux = 2 pi, face flux = 2
    class Rot:
        def value(self, x):
            x = np.asarray(x)
            return np.stack([-x[..., 1], x[..., 0], np.zeros(x.shape[:-1])], axis=-1)

        def grad(self, x):
            return np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

    flux, circ, gap = stokes_flux_check(Rot(), hemisphere, order=8)
    assert flux == pytest.approx(2.0 * np.pi, abs=1e-10)
    assert gap <= 1e-10
    flux, circ, gap = stokes_flux_check(Rot(), face, order=8)
    assert flux == pytest.approx(2.0, abs=1e-12)
    assert gap <= 1e-12


def test_stokes_polynomial(hemisphere):
    u = make_polynomial(3, 3)
    flux, circ, gap = stokes_flux_check(u, hemisphere, order=16)
    assert gap <= 1e-6


def test_surface_divergence_theorem(hemisphere, face):
    u = make_polynomial(41, 4)
    for patch in (hemisphere, face):
        gaps = [surface_divergence_check(u.value, patch, order=o)[2]
                for o in (4, 8, 16)]
        assert gaps[2] <= 1e-6
        assert gaps[0] >= gaps[1] - 1e-12
        assert gaps[1] >= gaps[2] - 1e-12


def test_surface_divergence_trivial_cases(face, hemisphere):
    # constant tangential field on a flat face: zero divergence, and the
    # edge integral telescopes
    v = lambda x: np.array([1.0, 0.0, 0.0])
    lhs, rhs, gap = surface_divergence_check(v, face, order=4)
    assert abs(lhs) <= 1e-12 and gap <= 1e-12
    # purely normal field on the cap: tangential part vanishes
    vn = lambda x: x / np.linalg.norm(x)
    lhs, rhs, gap = surface_divergence_check(vn, hemisphere, order=8)
    assert gap <= 1e-9


def test_edge_quadrature_lengths(face, hemisphere):
    total = sum(w for side in face.edge_sides
                for _, _, w in face.edge_quadrature(side, 8))
    assert total == pytest.approx(4.0, abs=1e-13)   # unit square perimeter
    rim = sum(w for _, _, w in hemisphere.edge_quadrature("smax", 16))
    assert rim == pytest.approx(2.0 * np.pi, abs=1e-10)


def test_edge_offset_points(face):
    s, t = face.edge_offset_point("smax", 1.0, 0.5, 0.01, inward=True)
    assert s == pytest.approx(0.99)
    s, t = face.edge_offset_point("smax", 1.0, 0.5, 0.01, inward=False)
    assert s == pytest.approx(1.01)


def test_unknown_edge_side_raises(face):
    with pytest.raises(ValueError):
        face.edge_quadrature("rim", 4)
