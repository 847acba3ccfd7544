"""Small complex linear algebra helpers shared across modules.

Column-major (Fortran) vec conventions throughout, so vec(A X B) =
(B^T kron A) vec(X) holds with numpy's kron.
"""

import numpy as np

LN2 = float(np.log(2.0))


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into a vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of vec for a rows x cols matrix."""
    return np.asarray(x).reshape(rows, cols, order="F")


def herm(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (A + A^H) / 2."""
    return 0.5 * (a + herm(a))


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    return bool(np.abs(a - herm(a)).max() <= tol * scale) if a.size else True


def min_eigval(a: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def logdet_hermitian(a: np.ndarray) -> float:
    """log det of a Hermitian PD matrix (natural log)."""
    sign, val = np.linalg.slogdet(a)
    return float(val)


def real_embedding(a: np.ndarray) -> np.ndarray:
    """Map a complex Hermitian n x n matrix to the real symmetric 2n x 2n
    matrix [[Re, -Im], [Im, Re]]; PSD-ness is preserved both ways and the
    determinant squares."""
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def complex_to_json(a: np.ndarray) -> list:
    """Nested lists with [re, im] pairs at the leaves."""
    a = np.asarray(a, dtype=complex)
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def json_to_complex(data: list) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex JSON leaves must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
