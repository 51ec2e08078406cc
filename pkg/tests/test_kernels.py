import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from scalefit.errors import InputError
from scalefit.kernels import KernelSpec, cross_kernel, eval_kernel, gram, sup_norm

RBF = KernelSpec("gaussian_rbf", gamma=1.0)


def test_rbf_identity():
    assert eval_kernel(RBF, [0.3, -2.0], [0.3, -2.0]) == 1.0


def test_rbf_unit_squared_distance():
    # exp(-1) to 30 digits: 0.367879441171442321595523770161
    assert eval_kernel(RBF, [0.0], [1.0]) == pytest.approx(0.36787944117144233, rel=1e-15)
    assert eval_kernel(RBF, [0.0, 0.0], [0.6, 0.8]) == pytest.approx(0.36787944117144233, rel=1e-15)


def test_linear_dot_product():
    assert eval_kernel(KernelSpec("linear"), [1, 2], [3, 4]) == 11.0


def test_eval_kernel_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(RBF, [1.0, 2.0], [1.0])




def test_invalid_specs_raise():
    with pytest.raises(InputError):
        KernelSpec("gaussian_rbf", gamma=0.0)
    with pytest.raises(InputError):
        KernelSpec("polynomial", degree=0)
    with pytest.raises(InputError):
        KernelSpec("sigmoid")


def test_sup_norm():
    assert sup_norm(KernelSpec("gaussian_rbf", gamma=37.0)) == 1.0
    assert sup_norm(KernelSpec("linear"), [[3.0, 4.0]]) == 5.0
    assert sup_norm(KernelSpec("polynomial", degree=2, coef0=0.0), [[1.0, 1.0]]) == 2.0
    with pytest.raises(InputError):
        sup_norm(KernelSpec("linear"), np.empty((0, 2)))


def test_gram_examples():
    assert gram(RBF, [[0.5]], jitter=0.0).entries.tolist() == [[1.0]]
    assert gram(RBF, [[0.5], [0.5]], jitter=0.0).entries.tolist() == [[1.0, 1.0], [1.0, 1.0]]
    K = gram(RBF, [[0.0], [1.0]], jitter=1e-8).entries
    e = 0.36787944117144233
    np.testing.assert_allclose(K, [[1 + 1e-8, e], [e, 1 + 1e-8]], rtol=1e-15)


def test_gram_dimension_mismatch():
    with pytest.raises(InputError):
        gram(RBF, [[0.0, 1.0], [1.0]])
    with pytest.raises(InputError):
        gram(RBF, [[0.0]], jitter=-1.0)


points = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 3)),
                elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0.01, 10.0), st.sampled_from(["gaussian_rbf", "linear", "polynomial"]))
def test_gram_symmetry_and_rbf_range(X, gamma, family):
    spec = KernelSpec(family, gamma=gamma, degree=3, coef0=1.0)
    G = gram(spec, X, jitter=1e-10)
    assert np.array_equal(G.entries, G.entries.T)
    if family == "gaussian_rbf":
        assert np.all(np.diag(G.entries) == 1.0 + 1e-10)
        assert np.all((G.entries >= 0) & (G.entries <= 1.0 + 1e-10))


@settings(max_examples=60, deadline=None)
@given(points, points)
def test_eval_kernel_symmetric(X, Z):
    x, z = X[0], Z[0]
    if x.shape != z.shape:
        return
    for spec in (RBF, KernelSpec("polynomial", degree=2, coef0=0.5)):
        assert eval_kernel(spec, x, z) == pytest.approx(eval_kernel(spec, z, x), rel=1e-15, abs=0)


def test_rbf_gram_positive_definite_on_distinct_points():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.uniform(-3, 3, size=(rng.integers(2, 60), rng.integers(1, 4)))
        gram(KernelSpec(gamma=float(rng.uniform(0.1, 5))), X, jitter=1e-10).cholesky()


def test_sup_norm_bounds_representer_functions():
    """max |f| over a dense grid <= ||k||_inf * sqrt(beta' K beta)."""
    rng = np.random.default_rng(11)
    grid = np.linspace(-3, 3, 2001).reshape(-1, 1)
    for spec in (KernelSpec(gamma=2.0), KernelSpec("polynomial", degree=2, coef0=1.0), KernelSpec("linear")):
        for _ in range(10):
            Xtr = rng.uniform(-3, 3, size=(8, 1))
            beta = rng.normal(size=8)
            f = cross_kernel(spec, grid, Xtr) @ beta
            norm = np.sqrt(beta @ gram(spec, Xtr, jitter=0.0).entries @ beta)
            # non-RBF sup norms are taken over the evaluation grid itself
            bound = sup_norm(spec, grid) * norm
            assert np.max(np.abs(f)) <= bound + 1e-9
