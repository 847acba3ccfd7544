"""Column-stacking, Hermitian helpers, real embedding, JSON codecs."""

import numpy as np
import pytest

from gee_precoder.linalg import (LN2, complex_to_json, herm, hermitize,
                                 is_hermitian, json_to_complex,
                                 logdet_hermitian, min_eigval, real_embedding,
                                 unvec, vec)


def test_vec_is_column_major():
    A = np.array([[1, 3], [2, 4]], dtype=complex)
    assert np.array_equal(vec(A), np.array([1, 2, 3, 4], dtype=complex))


def test_vec_unvec_roundtrip():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
    assert np.array_equal(unvec(vec(A), 3, 5), A)


def test_vec_kron_identity():
    # vec(A X C) = (C^T kron A) vec(X), the workhorse behind the error terms
    rng = np.random.default_rng(1)
    A = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    X = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    C = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    lhs = vec(A @ X @ C)
    rhs = np.kron(C.T, A) @ vec(X)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_herm_and_hermitize():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.array_equal(herm(A), A.conj().T)
    H = hermitize(A)
    assert is_hermitian(H)
    assert not is_hermitian(A)


def test_min_eigval_and_logdet():
    w = np.array([0.5, 2.0, 3.0])
    rng = np.random.default_rng(3)
    Q = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
    A = Q @ np.diag(w) @ herm(Q)
    assert abs(min_eigval(A) - 0.5) < 1e-12
    assert abs(logdet_hermitian(A) - np.log(w).sum()) < 1e-12


def test_real_embedding_spectrum():
    # eigenvalues of the real embedding are those of the complex matrix, doubled
    rng = np.random.default_rng(4)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    A = hermitize(A)
    R = real_embedding(A)
    assert R.shape == (6, 6)
    assert np.abs(np.imag(R)).max() == 0.0
    w = np.sort(np.linalg.eigvalsh(A))
    wr = np.sort(np.linalg.eigvalsh(R))
    assert np.abs(np.repeat(w, 2) - wr).max() < 1e-12


def test_json_codec_roundtrip():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(2, 3, 4)) + 1j * rng.normal(size=(2, 3, 4))
    assert np.array_equal(json_to_complex(complex_to_json(A)), A)


def test_ln2_constant():
    assert LN2 == pytest.approx(np.log(2.0), abs=0.0)
