"""Eigenbasis, Fourier transform, Hodge decomposition, responses, spillage."""

import numpy as np
import pytest

from sccnn import complexes, filters, spectra
from sccnn.errors import ValidationError

from conftest import random_complex_with_triangles

# L_1 spectrum of the worked example, frozen to 2 decimals with classes.
EXPECTED_EIGS = [0.0, 0.80, 1.59, 1.61, 2.43, 3.00, 3.96, 4.41, 5.12, 6.08]
EXPECTED_GRADIENT = [0.80, 1.61, 2.43, 3.96, 5.12, 6.08]
EXPECTED_CURL = [1.59, 3.00, 4.41]


@pytest.fixture(scope="module")
def basis(example_sc):
    return spectra.eigenbasis(example_sc, 1)


def test_example_edge_spectrum(basis):
    assert np.allclose(np.round(basis.values, 2), EXPECTED_EIGS)
    assert np.allclose(np.round(basis.values[basis.indices("gradient")], 2), EXPECTED_GRADIENT)
    assert np.allclose(np.round(basis.values[basis.indices("curl")], 2), EXPECTED_CURL)
    assert basis.n_harmonic == 1
    assert basis.values[basis.indices("harmonic")][0] < 1e-10


def test_basis_orthonormal_and_signed(basis):
    n = basis.vectors.shape[0]
    assert np.abs(basis.vectors.T @ basis.vectors - np.eye(n)).max() < 1e-9
    for j in range(n):
        col = basis.vectors[:, j]
        first = col[np.abs(col) > 1e-12 * np.abs(col).max()][0]
        assert first > 0


def test_connected_graph_has_one_harmonic(example_sc):
    b0 = spectra.eigenbasis(example_sc, 0)
    assert b0.n_harmonic == 1
    constant = b0.vectors[:, list(b0.classes).index("harmonic")]
    assert np.allclose(constant, constant[0])


def test_class_counts_match_ranks(example_sc, basis):
    b1 = complexes.incidence(example_sc, 1).toarray()
    b2 = complexes.incidence(example_sc, 2).toarray()
    rank_b1 = np.linalg.matrix_rank(b1)
    rank_b2 = np.linalg.matrix_rank(b2)
    assert basis.n_gradient == rank_b1
    assert basis.n_curl == rank_b2
    assert basis.n_harmonic == example_sc.num(1) - rank_b1 - rank_b2


def test_sft_round_trip(basis):
    rng = np.random.default_rng(11)
    x = rng.standard_normal((10, 100))
    assert np.abs(spectra.isft(basis, spectra.sft(basis, x)) - x).max() < 1e-10


def test_sft_of_eigenvector_is_basis_vector(basis):
    coeffs = spectra.sft(basis, basis.vectors[:, 4])
    expected = np.zeros(10)
    expected[4] = 1.0
    assert np.allclose(coeffs, expected, atol=1e-12)


def test_gradient_flow_has_only_gradient_coefficients(example_sc, basis):
    rng = np.random.default_rng(5)
    flow = complexes.gradient(example_sc, rng.standard_normal(7))
    coeffs = spectra.sft(basis, flow)
    assert np.abs(coeffs[basis.indices("harmonic")]).max() < 1e-9
    assert np.abs(coeffs[basis.indices("curl")]).max() < 1e-9


def test_sft_rejects_bad_shape(basis):
    with pytest.raises(ValidationError):
        spectra.sft(basis, np.zeros(3))
    with pytest.raises(ValidationError):
        spectra.isft(basis, np.zeros(3))


def test_hodge_decompose_recombines(example_sc):
    rng = np.random.default_rng(17)
    x = rng.standard_normal(10)
    parts = spectra.hodge_decompose(example_sc, 1, x)
    assert np.abs(parts.x_g + parts.x_h + parts.x_c - x).max() < 1e-9
    assert abs(parts.x_g @ parts.x_h) < 1e-8
    assert abs(parts.x_g @ parts.x_c) < 1e-8
    assert abs(parts.x_h @ parts.x_c) < 1e-8
    b1 = complexes.incidence(example_sc, 1).toarray()
    b2 = complexes.incidence(example_sc, 2).toarray()
    assert np.abs(b2.T @ parts.x_g).max() < 1e-8
    assert np.abs(b1 @ parts.x_c).max() < 1e-8
    l1 = complexes.hodge_laplacians(example_sc, 1)[0]
    assert np.abs(l1 @ parts.x_h).max() < 1e-8
    # pseudoinverse-projector oracle for the gradient part
    projector = b1.T @ np.linalg.pinv(b1 @ b1.T) @ b1
    assert np.abs(parts.x_g - projector @ x).max() < 1e-9


def test_hodge_decompose_pure_inputs(example_sc):
    rng = np.random.default_rng(23)
    b2 = complexes.incidence(example_sc, 2).toarray()
    curl_flow = b2 @ rng.standard_normal(3)
    parts = spectra.hodge_decompose(example_sc, 1, curl_flow)
    assert np.abs(parts.x_g).max() < 1e-9
    assert np.abs(parts.x_h).max() < 1e-9
    basis = spectra.eigenbasis(example_sc, 1)
    harmonic = basis.vectors[:, list(basis.classes).index("harmonic")]
    parts = spectra.hodge_decompose(example_sc, 1, harmonic)
    assert np.abs(parts.x_g).max() < 1e-9
    assert np.abs(parts.x_c).max() < 1e-9
    assert np.abs(parts.x_h - harmonic).max() < 1e-12


@pytest.mark.parametrize("seed", range(8))
def test_decomposition_on_random_complexes(seed):
    rng = np.random.default_rng(400 + seed)
    sc = random_complex_with_triangles(rng)
    for k in range(sc.dim + 1):
        x = rng.standard_normal(sc.num(k))
        parts = spectra.hodge_decompose(sc, k, x)
        assert np.abs(parts.x_g + parts.x_h + parts.x_c - x).max() < 1e-8


def test_frequency_response_formulas(example_sc, basis):
    # identity filter responds 1 everywhere
    ident = filters.ScFilter(k=1, w_d=[1.0], w_u=[0.0])
    assert np.allclose(spectra.filter_frequency_response(ident, basis), 1.0)
    # pure one-step lower shift: lambda on gradient, 0 elsewhere
    lower = filters.ScFilter(k=1, w_d=[0.0, 1.0], w_u=[0.0])
    response = spectra.filter_frequency_response(lower, basis)
    for i, label in enumerate(basis.classes):
        if label == "gradient":
            assert np.isclose(response[i], basis.values[i])
        else:
            assert response[i] == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_response_matches_spatial_application(example_sc, basis, seed):
    rng = np.random.default_rng(600 + seed)
    filt = filters.ScFilter(k=1, w_d=rng.standard_normal(4), w_u=rng.standard_normal(4))
    x = rng.standard_normal(10)
    spectral = spectra.isft(basis, spectra.filter_frequency_response(filt, basis) * spectra.sft(basis, x))
    spatial = filters.apply(filt, example_sc, x)
    assert np.abs(spectral - spatial).max() < 1e-8


def test_spillage_identity_and_oddness(example_sc):
    rng = np.random.default_rng(31)
    flow = complexes.gradient(example_sc, rng.standard_normal(7))
    report = spectra.spillage_report(example_sc, 1, flow, "identity")
    for before, after in report.values():
        assert np.isclose(before, after)
    plus = spectra.spillage_report(example_sc, 1, flow, "tanh")
    minus = spectra.spillage_report(example_sc, 1, -flow, "tanh")
    for label in plus:
        assert np.allclose(plus[label], minus[label])


def test_tanh_spills_gradient_flow(example_sc):
    rng = np.random.default_rng(37)
    flow = complexes.gradient(example_sc, 2.0 * rng.standard_normal(7))
    report = spectra.spillage_report(example_sc, 1, flow, "tanh")
    assert report["harmonic"][0] < 1e-16
    assert report["curl"][0] < 1e-16
    assert report["harmonic"][1] > 1e-8
    assert report["curl"][1] > 1e-8


def test_dense_limit_refusal():
    sc = complexes.build_complex([[i] for i in range(2001)])
    with pytest.raises(ValidationError):
        spectra.eigenbasis(sc, 0)


def test_symmetric_normalized_scheme_supported(example_sc):
    basis = spectra.eigenbasis(example_sc, 1, scheme="random_walk_symmetric")
    assert basis.values.min() > -1e-10
    with pytest.raises(ValidationError):
        spectra.eigenbasis(example_sc, 1, scheme="random_walk")
