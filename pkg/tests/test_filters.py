"""Polynomial filter application, Lipschitz constants, grids, power iteration."""

import numpy as np
import pytest

from sccnn import complexes, filters
from sccnn.errors import ValidationError

from conftest import random_complex_with_triangles


def test_filter_validation():
    with pytest.raises(ValidationError):
        filters.ScFilter(k=1, w_d=[1.0], w_u=[1.0], variant="lower_only")
    with pytest.raises(ValidationError):
        filters.ScFilter(k=1, w_d=[np.inf], w_u=[])
    with pytest.raises(ValidationError):
        filters.ScFilter(k=1, w_d=[1.0], w_u=[], variant="sideways")


def test_identity_filter_is_bitwise_identity(example_sc):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10)
    filt = filters.ScFilter(k=1, w_d=[1.0], w_u=[0.0])
    assert np.array_equal(filters.apply(filt, example_sc, x), x)


def test_one_step_lower_shift_matches_dense(example_sc):
    _, lower, _ = complexes.hodge_laplacians(example_sc, 1)
    indicator = np.zeros(10)
    indicator[0] = 1.0
    filt = filters.ScFilter(k=1, w_d=[0.0, 1.0], w_u=[0.0])
    out = filters.apply(filt, example_sc, indicator)
    assert np.allclose(out, lower.toarray() @ indicator)
    # the one-step shift only reaches the lower neighborhood of e_1 (+ itself)
    hood = complexes.neighborhoods(example_sc, 1, 0)
    support = set(np.nonzero(out)[0])
    assert support <= set(hood.lower) | {0}


def test_apply_is_linear(example_sc):
    rng = np.random.default_rng(1)
    filt = filters.ScFilter(k=1, w_d=rng.standard_normal(3), w_u=rng.standard_normal(2))
    x, y = rng.standard_normal((2, 10))
    a, b = 0.7, -1.3
    combined = filters.apply(filt, example_sc, a * x + b * y)
    separate = a * filters.apply(filt, example_sc, x) + b * filters.apply(filt, example_sc, y)
    assert np.abs(combined - separate).max() < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_apply_commutes_with_permutation(seed):
    rng = np.random.default_rng(700 + seed)
    sc = random_complex_with_triangles(rng)
    filt = filters.ScFilter(k=1, w_d=rng.standard_normal(3), w_u=rng.standard_normal(3))
    x = rng.standard_normal(sc.num(1))
    perms = [rng.permutation(sc.num(k)) for k in range(sc.dim + 1)]
    permuted, mats = complexes.permute_complex(sc, perms)
    lhs = mats[1] @ filters.apply(filt, sc, x)
    rhs = filters.apply(filt, permuted, mats[1] @ x)
    assert np.abs(lhs - rhs).max() < 1e-9


def test_lower_projection_fast_path(example_sc):
    # Filtering a pure gradient flow with the lower series can be done in the
    # node space: H_d B_1ᵀ x_0 = B_1ᵀ (sum_t w_t L_0^t) x_0.
    rng = np.random.default_rng(2)
    coeffs = rng.standard_normal(4)
    x0 = rng.standard_normal(7)
    edge_filter = filters.ScFilter(k=1, w_d=coeffs, w_u=[], variant="lower_only")
    via_edges = filters.apply(edge_filter, example_sc, complexes.gradient(example_sc, x0))
    node_filter = filters.ScFilter(k=0, w_d=[], w_u=coeffs, variant="upper_only")
    via_nodes = complexes.gradient(example_sc, filters.apply(node_filter, example_sc, x0))
    assert np.abs(via_edges - via_nodes).max() < 1e-9


def test_upper_projection_fast_path(example_sc):
    # H_u B_2 x_2 = B_2 (sum_t w_t L_{2,d}^t) x_2
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(3)
    x2 = rng.standard_normal(3)
    b2 = complexes.incidence(example_sc, 2)
    edge_filter = filters.ScFilter(k=1, w_d=[], w_u=coeffs, variant="upper_only")
    via_edges = filters.apply(edge_filter, example_sc, b2 @ x2)
    tri_filter = filters.ScFilter(k=2, w_d=coeffs, w_u=[], variant="lower_only")
    via_triangles = b2 @ filters.apply(tri_filter, example_sc, x2)
    assert np.abs(via_edges - via_triangles).max() < 1e-9


def test_lipschitz_constants_trivial_cases():
    constant = filters.ScFilter(k=1, w_d=[2.0], w_u=[-1.0])
    assert filters.integral_lipschitz_constants(constant, [1.0], [1.0]) == (0.0, 0.0)
    linear = filters.ScFilter(k=1, w_d=[0.0, 1.0], w_u=[0.0])
    c_d, c_u = filters.integral_lipschitz_constants(linear, np.linspace(0, 2, 201), [1.0])
    assert np.isclose(c_d, 2.0)
    assert c_u == 0.0


def test_lipschitz_constants_against_finer_grid():
    rng = np.random.default_rng(4)
    filt = filters.ScFilter(k=1, w_d=rng.standard_normal(4), w_u=rng.standard_normal(4))
    coarse_g = np.linspace(0.01, 5.0, 500)
    coarse_c = np.linspace(0.01, 3.0, 300)
    fine_g = np.linspace(0.01, 5.0, 5000)
    fine_c = np.linspace(0.01, 3.0, 3000)
    coarse = filters.integral_lipschitz_constants(filt, coarse_g, coarse_c)
    fine = filters.integral_lipschitz_constants(filt, fine_g, fine_c)
    assert abs(coarse[0] - fine[0]) <= 0.01 * fine[0]
    assert abs(coarse[1] - fine[1]) <= 0.01 * fine[1]


def test_grid_validation():
    filt = filters.ScFilter(k=1, w_d=[1.0, 1.0], w_u=[])
    with pytest.raises(ValidationError):
        filters.integral_lipschitz_constants(filt, [], [1.0])
    with pytest.raises(ValidationError):
        filters.integral_lipschitz_constants(filt, [-1.0], [1.0])


def test_power_iteration_matches_dense_eigenvalue(example_sc):
    l1, lower, upper = complexes.hodge_laplacians(example_sc, 1)
    assert np.isclose(filters.lambda_max(l1), np.linalg.eigvalsh(l1.toarray())[-1], rtol=1e-5)
    assert np.isclose(filters.lambda_max(lower), np.linalg.eigvalsh(lower.toarray())[-1], rtol=1e-5)
    assert filters.lambda_max(None) == 0.0


def test_application_norm_bound(example_sc):
    rng = np.random.default_rng(6)
    _, lower, upper = complexes.hodge_laplacians(example_sc, 1)
    lam_g = filters.lambda_max(lower)
    lam_c = filters.lambda_max(upper)
    for _ in range(10):
        filt = filters.ScFilter(k=1, w_d=rng.standard_normal(3), w_u=rng.standard_normal(3))
        x = rng.standard_normal(10)
        bound = (
            np.sum(np.abs(filt.w_d) * lam_g ** np.arange(3))
            + np.sum(np.abs(filt.w_u) * lam_c ** np.arange(3))
        ) * np.linalg.norm(x)
        assert np.linalg.norm(filters.apply(filt, example_sc, x)) <= bound * (1 + 1e-9)


def test_frequency_grids(example_sc):
    ops = complexes.normalized_operators(example_sc, 1, "raw")
    grid_g, grid_c = filters.frequency_grids(ops, step=0.01)
    assert grid_g.min() >= 0.01 - 1e-12
    assert grid_g.max() <= filters.lambda_max(ops.lap_down) + 1e-9
    assert np.allclose(np.diff(grid_g), 0.01)
    assert grid_c.size > 0
    ops2 = complexes.normalized_operators(example_sc, 2, "raw")
    _, empty_c = filters.frequency_grids(ops2)
    assert empty_c.size == 0
    with pytest.raises(ValidationError):
        filters.frequency_grids(ops, step=0.0)


def test_apply_validates_orders(example_sc):
    filt = filters.ScFilter(k=2, w_d=[1.0], w_u=[])
    ops = complexes.normalized_operators(example_sc, 1, "raw")
    with pytest.raises(ValidationError):
        filters.apply(filt, ops, np.zeros(10))
    good = filters.ScFilter(k=1, w_d=[1.0], w_u=[0.0])
    with pytest.raises(ValidationError):
        filters.apply(good, example_sc, np.zeros(4))
