import numpy as np
import pytest

from costress.fields import (
    Box,
    CallableField,
    ConformalParams,
    ConstantField,
    FdStencilError,
    PolynomialField,
    RigidMotionField,
    ZeroField,
    curl_from_grad,
    fd_derivative_oracle,
    field_from_spec,
    field_to_spec,
    kinematics,
    make_conformal,
    make_polynomial,
    random_conformal,
)
from costress.tensors import anti, skw


def test_fd_oracle_on_known_polynomial():
    # u = (x^2 y, y z, x^3) has simple hand-computed derivatives
    def u(x):
        x = np.asarray(x)
        return np.array([x[..., 0] ** 2 * x[..., 1], x[..., 1] * x[..., 2],
                         x[..., 0] ** 3]).T if x.ndim > 1 else np.array(
            [x[0] ** 2 * x[1], x[1] * x[2], x[0] ** 3])

    x = np.array([0.5, 0.4, 0.3])
    G = fd_derivative_oracle(u, x, 1)
    expected = np.array([
        [2 * 0.5 * 0.4, 0.25, 0.0],
        [0.0, 0.3, 0.4],
        [3 * 0.25, 0.0, 0.0],
    ])
    assert np.allclose(G, expected, atol=1e-10)
    H = fd_derivative_oracle(u, x, 2)
    assert H[0, 0, 0] == pytest.approx(2 * 0.4, abs=1e-8)
    assert H[0, 0, 1] == pytest.approx(2 * 0.5, abs=1e-8)
    assert H[0, 1, 0] == pytest.approx(2 * 0.5, abs=1e-8)  # symmetrized
    T = fd_derivative_oracle(u, x, 3)
    assert T[2, 0, 0, 0] == pytest.approx(6.0, abs=1e-6)
    assert T[0, 0, 0, 1] == pytest.approx(2.0, abs=1e-6)


def test_fd_oracle_rejects_bad_order():
    with pytest.raises(ValueError):
        fd_derivative_oracle(lambda x: x, np.zeros(3), 4)


def test_fd_oracle_boundary_shrink_and_failure():
    box = Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0))
    u = make_polynomial(2, 3)
    x = np.array([0.01, 0.5, 0.5])
    G = fd_derivative_oracle(u.value, x, 1, domain=box)
    assert np.allclose(G, u.grad(x), atol=1e-6)
    with pytest.raises(FdStencilError):
        fd_derivative_oracle(u.value, np.array([1e-9, 0.5, 0.5]), 1, domain=box)
    with pytest.raises(FdStencilError):
        fd_derivative_oracle(u.value, np.array([0.0, 0.5, 0.5]), 1, domain=box)


@pytest.mark.parametrize("degree", [1, 3, 5])
def test_polynomial_closed_forms_match_fd(degree):
    u = make_polynomial(17 + degree, degree)
    rng = np.random.default_rng(degree)
    for x in rng.uniform(-0.8, 0.8, (4, 3)):
        assert np.allclose(u.grad(x), fd_derivative_oracle(u.value, x, 1),
                           atol=1e-9, rtol=1e-9)
        assert np.allclose(u.grad2(x), fd_derivative_oracle(u.value, x, 2),
                           atol=1e-7, rtol=1e-7)
        assert np.allclose(u.grad3(x), fd_derivative_oracle(u.value, x, 3),
                           atol=1e-5, rtol=1e-5)


def test_polynomial_batch_evaluation_consistent():
    u = make_polynomial(23, 4)
    X = np.random.default_rng(1).uniform(-1, 1, (7, 3))
    assert np.allclose(u.value(X), np.stack([u.value(x) for x in X]))
    assert np.allclose(u.grad2(X), np.stack([u.grad2(x) for x in X]))
    assert np.allclose(u.grad3(X), np.stack([u.grad3(x) for x in X]))


def test_make_polynomial_is_deterministic_and_degree_capped():
    a = make_polynomial(42, 3)
    b = make_polynomial(42, 3)
    assert np.array_equal(a.coeffs, b.coeffs)
    with pytest.raises(ValueError):
        make_polynomial(0, 7)


def test_rigid_motion_kinematics():
    w = np.array([0.3, -0.2, 0.5])
    u = RigidMotionField(w, b=(1.0, 0.0, 0.0))
    x = np.array([0.2, 0.7, -0.3])
    state = kinematics(u, x)
    assert np.allclose(state.sym_grad, 0.0, atol=1e-15)
    assert np.allclose(state.curl_u, 2.0 * w, atol=1e-14)
    assert np.allclose(state.axl_skw_grad, w, atol=1e-14)
    assert np.allclose(state.grad_curl, 0.0)


def test_curl_identity_on_polynomials():
    for seed in range(5):
        u = make_polynomial(seed, 4)
        x = np.random.default_rng(seed).uniform(-1, 1, 3)
        state = kinematics(u, x)
        assert np.allclose(state.curl_u, 2.0 * state.axl_skw_grad, atol=1e-12)
        assert abs(np.trace(state.grad_curl)) <= 1e-12 * max(
            1.0, np.linalg.norm(state.grad_curl))


class TestConformal:
    def test_gradient_structure(self):
        # grad phi_c = (<w,x> + p) id + anti(w x x) + A pointwise
        cp = ConformalParams(w_axial=(0.5, -1.0, 0.25), a_hat=anti((0.1, 0.2, 0.3)),
                             b_hat=(1.0, 2.0, 3.0), p_hat=0.7)
        u = make_conformal(cp)
        x = np.array([0.3, -0.8, 0.6])
        G = u.grad(x)
        w = np.asarray(cp.w_axial)
        expected = (w @ x + cp.p_hat) * np.eye(3) + anti(np.cross(w, x)) + cp.a_hat
        assert np.allclose(G, expected, atol=1e-14)
        assert np.allclose(G, fd_derivative_oracle(u.value, x, 1), atol=1e-9)

    def test_second_gradient_constant(self):
        u = random_conformal(4)
        x1, x2 = np.array([0.1, 0.2, 0.3]), np.array([-0.9, 0.5, 0.0])
        assert np.allclose(u.grad2(x1), u.grad2(x2), atol=1e-15)
        assert np.allclose(u.grad2(x1), fd_derivative_oracle(u.value, x1, 2),
                           atol=1e-7)

    def test_grad_curl_is_twice_the_generator(self):
        cp = ConformalParams(w_axial=(2.0, 0.0, 0.0))
        u = make_conformal(cp)
        state = kinematics(u, np.array([0.4, 0.1, -0.2]))
        W = anti(np.array(cp.w_axial))
        assert np.allclose(state.grad_curl, 2.0 * W, atol=1e-12)
        # torsion-free: sym grad curl = 0
        assert np.allclose(state.chi_torsion, 0.0, atol=1e-13)

    def test_jacobian_in_conformal_algebra(self):
        # dev sym grad vanishes: the Jacobian is R.id + so(3)
        u = random_conformal(9)
        for x in np.random.default_rng(9).uniform(-1, 1, (5, 3)):
            G = u.grad(x)
            devsym = 0.5 * (G + G.T) - (np.trace(G) / 3.0) * np.eye(3)
            assert np.max(np.abs(devsym)) <= 1e-13

    def test_a_hat_must_be_skew(self):
        with pytest.raises(ValueError):
            ConformalParams(a_hat=np.eye(3))


def test_printed_counterexample_field_is_torsion_free():
    # (x1^2 - x2^2 - x3^2, 2 x1 x2, 2 x1 x3): inhomogeneous yet
    # sym grad curl = 0 everywhere
    def u(x):
        return np.array([x[0] ** 2 - x[1] ** 2 - x[2] ** 2,
                         2.0 * x[0] * x[1], 2.0 * x[0] * x[2]])

    field = CallableField(u, name="printed-counterexample")
    rng = np.random.default_rng(55)
    for x in rng.uniform(-1.0, 1.0, (10, 3)):
        H = fd_derivative_oracle(u, x, 2)
        M = np.einsum("ilm,mlj->ij", np.array(
            [[[0, 0, 0], [0, 0, 1], [0, -1, 0]],
             [[0, 0, -1], [0, 0, 0], [1, 0, 0]],
             [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]], dtype=float), H)
        assert np.max(np.abs(0.5 * (M + M.T))) <= 1e-10
        expected = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -4.0], [0.0, 4.0, 0.0]])
        assert np.allclose(M, expected, atol=1e-8)
    # and the displacement gradient is not constant
    g0 = field.grad(np.zeros(3))
    g1 = field.grad(np.ones(3) * 0.5)
    assert np.max(np.abs(g0 - g1)) > 0.5


def test_zero_and_constant_fields():
    z = ZeroField()
    c = ConstantField((1.0, -2.0, 0.5))
    X = np.random.default_rng(0).uniform(-1, 1, (4, 3))
    assert np.allclose(z.value(X), 0.0)
    assert np.allclose(c.value(X) - np.array([1.0, -2.0, 0.5]), 0.0)
    assert c.grad(X).shape == (4, 3, 3)
    assert np.allclose(c.grad(X), 0.0)


def test_field_spec_round_trip():
    for f in [ZeroField(), ConstantField((1, 2, 3)),
              RigidMotionField((0.1, 0.2, 0.3), b=(1, 0, 0)),
              make_polynomial(8, 3), random_conformal(5)]:
        g = field_from_spec(field_to_spec(f))
        x = np.array([0.25, -0.5, 0.75])
        assert np.allclose(f.value(x), g.value(x), atol=1e-14)
    with pytest.raises(ValueError):
        field_from_spec({"family": "nope"})
    with pytest.raises(ValueError):
        field_to_spec(CallableField(lambda x: x))


def test_curl_from_grad_convention():
    # curl of (-y, x, 0) is (0, 0, 2)
    u = make_polynomial(0, 1)
    G = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.allclose(curl_from_grad(G), [0.0, 0.0, 2.0])


def test_skw_grad_relation():
    u = make_polynomial(31, 3)
    x = np.array([0.2, 0.3, 0.4])
    state = kinematics(u, x)
    assert np.allclose(anti(state.axl_skw_grad), skw(state.grad_u), atol=1e-13)
