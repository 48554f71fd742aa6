"""Deterministic truncated eigen-decompositions via seeded power iteration.

Used for principal-direction removal in cohort rotation and for the
low-rank factorization of concept co-occurrence PPMI matrices. Power
iteration with deflation keeps results bit-reproducible across BLAS
builds and thread counts, which dense LAPACK eigensolvers do not
guarantee for degenerate spectra.
"""

from __future__ import annotations

import numpy as np

POWER_ITERATIONS = 100
POWER_TOL = 1e-10


def _start_vector(n: int, seed: int, component: int) -> np.ndarray:
    rng = np.random.default_rng([seed, component])
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def top_principal_directions(
    rows: np.ndarray,
    rank: int,
    seed: int = 0,
    iterations: int = POWER_ITERATIONS,
    tol: float = POWER_TOL,
) -> np.ndarray:
    """Top `rank` principal directions of the row matrix (not centered here).

    Power iteration on the Gram operator v -> X^T (X v), deflating rows
    after each direction. Returns an array of shape (r, dim) with r <=
    rank (directions whose variance vanishes are not emitted).
    """
    work = np.array(rows, dtype=np.float64, copy=True)
    dim = work.shape[1]
    directions: list[np.ndarray] = []
    for component in range(rank):
        v = _start_vector(dim, seed, component)
        for _ in range(iterations):
            w = work.T @ (work @ v)
            norm = np.linalg.norm(w)
            if norm < 1e-300:
                v = None
                break
            w /= norm
            # sign-fix so convergence is measured on a consistent ray
            if w @ v < 0:
                w = -w
            if np.linalg.norm(w - v) < tol:
                v = w
                break
            v = w
        if v is None:
            break
        variance = np.linalg.norm(work @ v)
        if variance < 1e-12:
            break
        directions.append(v)
        work -= np.outer(work @ v, v)
    if not directions:
        return np.zeros((0, dim))
    return np.array(directions)


def top_signed_eigenpairs(
    matrix: np.ndarray,
    rank: int,
    seed: int = 0,
    iterations: int = POWER_ITERATIONS,
    tol: float = POWER_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Largest-eigenvalue pairs of a symmetric matrix, by signed value.

    Shifts the matrix by a Gershgorin bound so plain power iteration
    converges to the algebraically largest eigenvalue, then deflates.
    Returns (values, vectors) sorted by descending eigenvalue, with
    vectors in rows; emits at most `rank` pairs.
    """
    m = np.array(matrix, dtype=np.float64, copy=True)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("matrix must be square")
    shift = float(np.max(np.sum(np.abs(m), axis=1))) + 1.0
    values: list[float] = []
    vectors: list[np.ndarray] = []
    for component in range(min(rank, n)):
        v = _start_vector(n, seed, component)
        for _ in range(iterations):
            w = m @ v + shift * v
            norm = np.linalg.norm(w)
            if norm < 1e-300:
                break
            w /= norm
            if w @ v < 0:
                w = -w
            if np.linalg.norm(w - v) < tol:
                v = w
                break
            v = w
        eigenvalue = float(v @ (m @ v))
        values.append(eigenvalue)
        vectors.append(v)
        m -= eigenvalue * np.outer(v, v)
    return np.array(values), np.array(vectors)
