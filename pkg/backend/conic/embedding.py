"""
Hermitian <-> real symmetric embedding.

A Hermitian n x n matrix M = A + iB is carried as the real 2n x 2n matrix
[[A, -B], [B, A]]. Going back, any symmetric Y = [[Y11, Y12], [Y21, Y22]]
maps to M = ((Y11 + Y22) + i(Y21 - Y12)) / 2, which is PSD whenever Y is
(it equals V^H Y V / 2 with V = [I; -iI]). Linear functionals pick up the
factor 1/2: tr(C M) = tr(emb(C) Y) / 2 and tr(M) = tr(Y) / 2.
"""
import numpy as np


def hermitian_to_real_embedding(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError('expected a square matrix')
    if not np.allclose(M, M.conj().T, atol=1e-10 * max(1.0, np.abs(M).max(initial=0.0))):
        raise ValueError('matrix is not Hermitian')
    A, B = M.real, M.imag
    return np.block([[A, -B], [B, A]])


def real_to_hermitian(Y):
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] // 2
    Y11, Y12 = Y[:n, :n], Y[:n, n:]
    Y21, Y22 = Y[n:, :n], Y[n:, n:]
    M = 0.5 * ((Y11 + Y22) + 1j * (Y21 - Y12))
    return 0.5 * (M + M.conj().T)


def hermitian_coefficient(C):
    """Coefficient G with <G, Y> = tr(C M) for the embedded variable Y."""
    return 0.5 * hermitian_to_real_embedding(C)


def trace_coefficient(n):
    """Coefficient with <G, Y> = tr(M) for an n x n Hermitian block."""
    return 0.5 * np.eye(2 * n)


def block_trace_coefficient(n_blocks, n, block):
    """<G, Y> = tr of diagonal block ``block`` of a (n_blocks*n)-dim Hermitian matrix."""
    selector = np.zeros((n_blocks * n, n_blocks * n))
    rows = slice(block * n, (block + 1) * n)
    selector[rows, rows] = np.eye(n)
    return hermitian_coefficient(selector)
