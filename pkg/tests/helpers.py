"""Shared constructions for the test suite."""

import numpy as np

from quatsync.qmat import QuatMatrix, QuatVector


def random_unit_rows(rng, n):
    """(n, 4) array of unit quaternions, rows uniform on the 3-sphere."""
    a = rng.normal(size=(n, 4))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def random_quat_matrix(rng, rows, cols):
    return QuatMatrix(rng.normal(size=(rows, cols, 4)))


def random_hermitian(rng, n):
    g = random_quat_matrix(rng, n, n)
    return (g + g.adjoint()).scaled(0.5)


def orthonormal_columns(rng, n):
    """Right-module Gram-Schmidt: n quaternion vectors, pairwise u_i* u_j = delta."""
    cols = []
    while len(cols) < n:
        v = QuatVector(rng.normal(size=(n, 4)))
        for u in cols:
            v = v - u.right_multiply(u.inner(v))
        norm = v.frobenius_norm()
        if norm < 1e-6:
            continue  # essentially never; redraw keeps the construction total
        cols.append(v.scaled(1.0 / norm))
    return cols


def hermitian_with_spectrum(rng, eigenvalues):
    """Hermitian quaternion matrix with the prescribed real spectrum.

    Built as sum_i lambda_i u_i u_i* over a random orthonormal base, so the
    eigenpairs are known exactly: (eigenvalues[i], u_i).
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n = eigenvalues.size
    cols = orthonormal_columns(rng, n)
    acc = QuatMatrix.zeros(n, n)
    for lam, u in zip(eigenvalues, cols):
        acc = acc + u.outer(u).scaled(lam)
    return acc, cols


def quat_vector_from_complex(embedded):
    """Inverse of complex_embed: [V1; V2] -> quaternion vector V1 + j V2."""
    m = embedded.size // 2
    v1, v2 = embedded[:m], embedded[m:]
    data = np.stack([v1.real, v1.imag, v2.real, -v2.imag], axis=1)
    return QuatVector(data)
