import json

import numpy as np
import pytest

from mixedqgt import (
    DensityMatrix,
    NotHermitianError,
    NotPSDError,
    Purification,
    SchemaError,
    TraceNotOneError,
    ValidationError,
    bures_angle,
    bures_distance,
    density_violations,
    fidelity,
    fix_phase,
    load_matrix,
    matrix_from_json,
    matrix_to_json,
    partial_trace_env,
    partial_trace_sys,
    psd_sqrt,
    purify,
    schmidt,
    sorted_eigh,
)
from conftest import rand_density, rand_herm, rand_unitary


def test_density_matrix_accepts_valid_state():
    rho = DensityMatrix(np.array([[0.7, 0.1j], [-0.1j, 0.3]]))
    assert rho.dim == 2
    assert rho.full_rank
    assert np.allclose(sorted(rho.eigenvalues), rho.eigenvalues[::-1])


def test_density_matrix_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        DensityMatrix(np.array([[0.5, 0.2], [0.1, 0.5]]))


def test_density_matrix_rejects_wrong_trace():
    with pytest.raises(TraceNotOneError):
        DensityMatrix(np.diag([0.5, 0.5 + 1e-7]))


def test_density_matrix_rejects_negative_eigenvalue():
    with pytest.raises(NotPSDError):
        DensityMatrix(np.diag([1.2, -0.2]))


def test_density_violations_lists_everything():
    msgs = density_violations(np.array([[1.3, 0.2], [0.1, -0.3]]))
    text = " ".join(msgs)
    assert "hermit" in text.lower()
    # an exactly valid state reports nothing
    assert density_violations(np.diag([0.25, 0.75])) == []


def test_rank_detection():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    assert not rho.full_rank
    assert DensityMatrix(np.diag([0.6, 0.4])).full_rank


def test_sorted_eigh_descending_and_deterministic():
    rng = np.random.default_rng(0)
    m = rand_herm(rng, 4)
    vals, vecs = sorted_eigh(m)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.conj().T, m)
    vals2, vecs2 = sorted_eigh(m.copy())
    assert np.array_equal(vals, vals2)
    assert np.array_equal(vecs, vecs2)


def test_sorted_eigh_degenerate_block_is_reproducible():
    # eigh's basis inside a degenerate cluster is arbitrary; the sorted
    # version must still return the same decomposition every time
    m = np.diag([0.5, 0.25, 0.25]).astype(complex)
    u = rand_unitary(np.random.default_rng(5), 3)
    m = u @ m @ u.conj().T
    vals, vecs = sorted_eigh(m)
    vals2, vecs2 = sorted_eigh(m)
    assert np.array_equal(vecs, vecs2)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.conj().T, m)


def test_fix_phase_makes_leading_entry_real_positive():
    v = np.array([0.0, 0.3 * np.exp(1.2j), 0.5])
    w = fix_phase(v)
    assert abs(w[1].imag) < 1e-14 and w[1].real > 0
    assert np.allclose(np.abs(w), np.abs(v))


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(1)
    rho = rand_density(rng, 4).mat
    s = psd_sqrt(rho)
    assert np.allclose(s @ s, rho, atol=1e-12)
    assert np.allclose(s, s.conj().T)


def test_psd_sqrt_clamps_tiny_negative_modes():
    rho = np.diag([1.0, -1e-14])
    s = psd_sqrt(rho)
    assert np.all(np.diag(s).real >= 0)


def test_purify_round_trip():
    rng = np.random.default_rng(2)
    for n in (2, 3, 4):
        rho = rand_density(rng, n)
        psi = purify(rho)
        back = partial_trace_env(psi)
        assert np.allclose(back.mat, rho.mat, atol=1e-12)


def test_partial_traces_match_explicit_kron_construction():
    # independent oracle: build |psi> = (A (x) B)|phi> coefficient by
    # coefficient and trace out each factor with an explicit einsum
    rng = np.random.default_rng(3)
    n = 3
    amp = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    amp /= np.linalg.norm(amp)
    psi = Purification.from_matrix(amp)
    full = np.outer(psi.amplitudes, psi.amplitudes.conj()).reshape(n, n, n, n)
    rho_s = np.einsum("abcb->ac", full)
    rho_e = np.einsum("abad->bd", full)
    assert np.allclose(partial_trace_env(psi).mat, rho_s, atol=1e-12)
    assert np.allclose(partial_trace_sys(psi).mat, rho_e, atol=1e-12)


def test_purification_rejects_unnormalized_vector():
    with pytest.raises(ValidationError):
        Purification(np.ones(4))


def test_purification_rejects_non_square_length():
    v = np.zeros(6)
    v[0] = 1.0
    with pytest.raises(ValidationError):
        Purification(v)


def test_overlap_matches_trace_formula():
    rng = np.random.default_rng(4)
    w1 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    w2 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    w1 /= np.linalg.norm(w1)
    w2 /= np.linalg.norm(w2)
    p1, p2 = Purification.from_matrix(w1), Purification.from_matrix(w2)
    assert np.isclose(p1.overlap(p2), np.trace(w1.conj().T @ w2))


def test_schmidt_reassembles_and_orders():
    rng = np.random.default_rng(5)
    amp = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    amp /= np.linalg.norm(amp)
    psi = Purification.from_matrix(amp)
    dec = schmidt(psi)
    assert np.allclose(dec.reassemble(), psi.amplitudes, atol=1e-12)
    assert np.all(dec.coefficients >= 0)
    assert np.all(np.diff(dec.coefficients) <= 1e-12)
    # bases orthonormal
    assert np.allclose(dec.sys_basis.conj().T @ dec.sys_basis, np.eye(4), atol=1e-12)
    assert np.allclose(dec.env_basis.conj().T @ dec.env_basis, np.eye(4), atol=1e-12)


def test_fidelity_commuting_states_oracle():
    p = np.array([0.5, 0.3, 0.2])
    q = np.array([0.2, 0.5, 0.3])
    a = DensityMatrix(np.diag(p))
    b = DensityMatrix(np.diag(q))
    assert np.isclose(fidelity(a, b), np.sum(np.sqrt(p * q)), atol=1e-12)


def test_fidelity_pure_states_is_overlap_modulus():
    v1 = np.array([1.0, 0.0])
    v2 = np.array([np.cos(0.4), np.sin(0.4)])
    a = DensityMatrix(np.outer(v1, v1))
    b = DensityMatrix(np.outer(v2, v2))
    assert np.isclose(fidelity(a, b), abs(np.dot(v1, v2)), atol=1e-12)


def test_fidelity_is_symmetric_and_one_on_equal_states():
    rng = np.random.default_rng(6)
    a, b = rand_density(rng, 3), rand_density(rng, 3)
    assert np.isclose(fidelity(a, b), fidelity(b, a), atol=1e-12)
    assert np.isclose(fidelity(a, a), 1.0, atol=1e-12)


def test_bures_quantities_are_consistent():
    rng = np.random.default_rng(7)
    a, b = rand_density(rng, 3), rand_density(rng, 3)
    f = fidelity(a, b)
    assert np.isclose(bures_angle(a, b), np.arccos(f), atol=1e-12)
    assert np.isclose(bures_distance(a, b) ** 2, 2 - 2 * f, atol=1e-12)


def test_matrix_json_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    rho = rand_density(rng, 3).mat
    obj = matrix_to_json(rho)
    assert set(obj) == {"dim", "re", "im"}
    assert np.allclose(matrix_from_json(obj), rho, atol=0)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(obj))
    assert np.allclose(load_matrix(path), rho, atol=0)


def test_matrix_from_json_rejects_malformed():
    with pytest.raises(SchemaError):
        matrix_from_json({"dim": 2, "re": [[1, 0], [0, 0]]})
    with pytest.raises(SchemaError):
        matrix_from_json({"dim": 3, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]})
