"""Brute-force oracles used by the tests.

These deliberately avoid the package's own linear-algebra paths: dense
N^2 x N^2 Kronecker operators built from the definitions, Gaussian
elimination, and cofactor-expansion determinants. Slow and simple on
purpose.
"""

import numpy as np


def dense_gamma(n: int) -> np.ndarray:
    """The symmetrization projector as an explicit n^2 x n^2 matrix."""
    G = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            row = i * n + j
            G[row, i * n + j] += 0.5
            G[row, j * n + i] += 0.5
    return G


def dense_kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product with explicit double-index loops."""
    n1, n2 = A.shape
    n3, n4 = B.shape
    out = np.zeros((n1 * n3, n2 * n4))
    for i in range(n1):
        for j in range(n3):
            for k in range(n2):
                for l in range(n4):
                    out[i * n3 + j, k * n4 + l] = A[i, k] * B[j, l]
    return out


def dense_sym_kron(W: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Gamma (W kron V) Gamma built densely."""
    n = W.shape[0]
    G = dense_gamma(n)
    return G @ dense_kron(W, V) @ G


def gauss_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    b = np.array(b, dtype=float).reshape(n, -1)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(A[col:, col])))
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = A[row, col] / A[col, col]
            A[row, col:] -= factor * A[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1 :] @ x[row + 1 :]) / A[row, row]
    return x.reshape(-1) if x.shape[1] == 1 else x


def cofactor_det(A: np.ndarray) -> float:
    """Determinant by recursive cofactor expansion along the first row."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(A, 0, axis=0), j, axis=1)
        total += ((-1.0) ** j) * A[0, j] * cofactor_det(minor)
    return total


def mvn_logpdf(y: np.ndarray, cov: np.ndarray) -> float:
    """Zero-mean Gaussian log density via elimination and cofactor determinant."""
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    quad = float(y @ gauss_solve(cov, y))
    if n <= 8:
        logdet = float(np.log(cofactor_det(cov)))
    else:
        sign, logdet = np.linalg.slogdet(cov)
        assert sign > 0
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * np.log(2.0 * np.pi)


def random_spd(rng: np.random.Generator, n: int, cond: float = 100.0) -> np.ndarray:
    """Random SPD matrix with a controlled condition number."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.geomspace(1.0, 1.0 / cond, n)
    return (Q * eigs) @ Q.T
