import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from costress.tensors import (
    EPS3,
    anti,
    apply_E_v,
    axl,
    cartan_decompose,
    contract_E_X,
    dev,
    inner,
    is_skew,
    is_symmetric,
    is_traceless,
    skw,
    sym,
    tangential_projector,
    tr,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
vec3 = arrays(np.float64, (3,), elements=finite)
mat33 = arrays(np.float64, (3, 3), elements=finite)


def test_permutation_tensor_values():
    assert EPS3[0, 1, 2] == 1.0
    assert EPS3[2, 1, 0] == -1.0
    assert EPS3[0, 0, 1] == 0.0
    # eps_ijk eps_ijk = 6
    assert np.sum(EPS3 * EPS3) == 6.0


def test_anti_printed_example():
    v = np.array([1.0, 2.0, 3.0])
    expected = np.array([[0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]])
    assert np.array_equal(anti(v), expected)


def test_anti_cross_product_action():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(anti(v) @ w, np.cross(v, w), atol=1e-14)


@given(vec3)
def test_axl_anti_round_trip(v):
    assert np.allclose(axl(anti(v)), v, atol=1e-9)


@given(vec3)
def test_anti_norm_identity(v):
    A = anti(v)
    assert inner(A, A) == pytest.approx(2.0 * v @ v, abs=1e-9, rel=1e-12)


def test_axl_rejects_non_skew():
    with pytest.raises(ValueError):
        axl(np.eye(3))


@given(mat33)
@settings(max_examples=200)
def test_cartan_decomposition(X):
    parts = cartan_decompose(X)
    assert np.allclose(parts.recombine(), X, atol=1e-9)
    # pairwise Frobenius orthogonality
    scale = max(1.0, np.linalg.norm(X) ** 2)
    assert abs(inner(parts.devsym, parts.skew)) <= 1e-10 * scale
    assert abs(inner(parts.devsym, parts.spherical)) <= 1e-10 * scale
    assert abs(inner(parts.skew, parts.spherical)) <= 1e-10 * scale
    assert is_traceless(parts.devsym, tol=1e-10)
    assert is_skew(parts.skew, tol=1e-10)


def test_sym_skw_dev_tr():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(3, 3))
    assert np.allclose(sym(X) + skw(X), X)
    assert is_symmetric(sym(X))
    assert is_skew(skw(X))
    assert tr(dev(X)) == pytest.approx(0.0, abs=1e-14)
    assert tr(X) == pytest.approx(X[0, 0] + X[1, 1] + X[2, 2])


def test_contraction_matches_explicit_loops():
    rng = np.random.default_rng(7)
    E = rng.normal(size=(3, 3, 3))
    X = rng.normal(size=(3, 3))
    v = rng.normal(size=3)
    loop = np.zeros(3)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                loop[i] += E[i, j, k] * X[k, j]
    assert np.allclose(contract_E_X(E, X), loop, atol=1e-14)
    loop2 = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                loop2[i, j] += E[i, j, k] * v[k]
    assert np.allclose(apply_E_v(E, v), loop2, atol=1e-14)


def test_anti_via_permutation_tensor():
    # anti(v)_ij = -eps_ijk v_k
    rng = np.random.default_rng(11)
    v = rng.normal(size=3)
    assert np.allclose(anti(v), -np.einsum("ijk,k->ij", EPS3, v), atol=1e-15)


def test_tangential_projector():
    n = np.array([0.0, 0.0, 1.0])
    P = tangential_projector(n)
    assert np.allclose(P, np.diag([1.0, 1.0, 0.0]))
    assert np.allclose(P @ P, P)
    with pytest.raises(ValueError):
        tangential_projector(np.array([1.0, 1.0, 0.0]))
