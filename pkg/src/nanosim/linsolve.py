# -*- coding: utf-8 -*-

__author__ = "Sebastian Kihle & Andreas Hoeimyr"
__email__ = "sebaskih@nmbu.no & andrehoi@nmbu.no"

"""
Complex sparse direct solves with scipy's SuperLU. A factorization is
computed once and reused for many right-hand sides; the cache identifies
equal matrices by a content fingerprint.
"""

import hashlib
import logging
import threading
import time

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-14
RESIDUAL_TOLERANCE = 1e-10


class SingularSystemError(RuntimeError):
    """
    Raised when a factorization meets a zero pivot.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ResidualError(RuntimeError):
    """
    Raised when a solution misses the residual tolerance.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def canonical(matrix):
    """
    CSR copy with summed duplicates, sorted indices and no stored zeros.
    """
    A = sparse.csr_matrix(matrix, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def fingerprint(matrix):
    """
    Identity of a sparse matrix: (dimension, nnz, 64-bit content hash).
    """
    A = canonical(matrix)
    digest = hashlib.blake2b(digest_size=8)
    digest.update(np.asarray(A.shape, dtype=np.int64).tobytes())
    digest.update(A.indptr.astype(np.int64).tobytes())
    digest.update(A.indices.astype(np.int64).tobytes())
    digest.update(np.ascontiguousarray(A.data, dtype=complex).tobytes())
    return A.shape[0], A.nnz, digest.hexdigest()


def relative_residual(matrix, x, b):
    """
    Backward error |A x - b| / (|A|_F |x| + |b|).
    """
    r = matrix @ x - b
    denominator = splinalg.norm(matrix) * np.linalg.norm(x) \
        + np.linalg.norm(b)
    if denominator == 0:
        return 0.0
    return float(np.linalg.norm(r) / denominator)


class Factorization:
    """
    LU factorization of a square sparse matrix. The handle is read-only
    once created, concurrent solves are serialized by a lock around the
    triangular solves.

    :param matrix: Square sparse matrix, real or complex.
    :param tolerance: Residual tolerance checked on every solve.
    """

    def __init__(self, matrix, tolerance=RESIDUAL_TOLERANCE):
        A = sparse.csc_matrix(matrix)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError('Only square matrices can be factorized')
        if A.dtype != complex:
            A = A.astype(complex)
        self.matrix = A
        self.tolerance = tolerance
        self.fingerprint = fingerprint(A)
        self.solve_time = 0.0
        self.n_solves = 0
        self._lock = threading.Lock()

        start = time.perf_counter()
        try:
            self._lu = splinalg.splu(A, permc_spec='COLAMD')
        except RuntimeError as err:
            raise SingularSystemError(
                'Factorization failed with: {}'.format(err))
        self.factor_time = time.perf_counter() - start

        # Checks the pivots against the matrix scale
        pivots = np.abs(self._lu.U.diagonal())
        scale = np.abs(A.data).max() if A.nnz else 0.0
        pivot = int(np.argmin(pivots)) if n else 0
        if n and pivots[pivot] <= PIVOT_TOLERANCE * scale:
            raise SingularSystemError(
                'Numerically singular matrix, pivot {} is {:.3e}'.format(
                    pivot, pivots[pivot]), pivot=pivot)
        logger.debug('Factorized %d x %d matrix with %d nonzeros in %.3f s',
                     n, n, A.nnz, self.factor_time)

    @property
    def shape(self):
        return self.matrix.shape

    def solve(self, b):
        return self.solve_many([b])[0]

    def solve_many(self, rhs):
        return solve_many(self, rhs)


def factorize(matrix, tolerance=RESIDUAL_TOLERANCE):
    """
    Factorizes a sparse matrix (or the matrix of a SparseSystem).

    :return: Factorization
    """
    matrix = getattr(matrix, 'matrix', matrix)
    return Factorization(matrix, tolerance=tolerance)


def solve_many(factorization, rhs):
    """
    Solves A x_k = b_k for a list of right-hand sides (or the columns of a
    2D array) with one factorization. Every solution is checked against
    the residual tolerance.

    :param factorization: Factorization of A.
    :param rhs: List of vectors or array (n, m).
    :return: List of solutions.
    """
    n = factorization.shape[0]
    if isinstance(rhs, np.ndarray) and rhs.ndim == 2:
        B = rhs
    else:
        vectors = [np.asarray(b) for b in rhs]
        if any(v.shape != (n,) for v in vectors):
            raise ValueError('Right-hand side does not match dimension '
                             '{}'.format(n))
        B = np.stack(vectors, axis=1) if vectors else np.zeros((n, 0))
    if B.shape[0] != n:
        raise ValueError('Right-hand side does not match dimension '
                         '{}'.format(n))
    B = np.asarray(B, dtype=complex)

    start = time.perf_counter()
    with factorization._lock:
        X = factorization._lu.solve(B) if B.shape[1] else B.copy()
    elapsed = time.perf_counter() - start
    factorization.solve_time += elapsed
    factorization.n_solves += B.shape[1]

    solutions = []
    for k in range(B.shape[1]):
        res = relative_residual(factorization.matrix, X[:, k], B[:, k])
        logger.debug('Solve %d residual %.2e', k, res)
        if res > factorization.tolerance:
            raise ResidualError(
                'Relative residual {:.3e} above tolerance {:.1e}'.format(
                    res, factorization.tolerance), residual=res)
        solutions.append(X[:, k])
    return solutions


def solve(matrix, b, tolerance=RESIDUAL_TOLERANCE):
    """
    One-shot factorize and solve.
    """
    return factorize(matrix, tolerance).solve(b)


class FactorizationCache:
    """
    Factorizations keyed by matrix fingerprint. hits and misses count the
    lookups, a hit is verified by entrywise comparison with the cached
    matrix.
    """

    def __init__(self, tolerance=RESIDUAL_TOLERANCE):
        self.tolerance = tolerance
        self._store = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def __contains__(self, key):
        return key in self._store

    def lookup(self, key):
        """
        Cached factorization for a fingerprint, None on a miss.
        """
        found = self._store.get(key)
        if found is None:
            self.misses += 1
        else:
            self.hits += 1
        return found

    def factorize(self, matrix):
        """
        Returns the cached factorization of matrix, factorizing on a miss.
        """
        key = fingerprint(matrix)
        found = self.lookup(key)
        if found is not None:
            if (canonical(found.matrix) != canonical(matrix)).nnz:
                raise RuntimeError('Fingerprint collision between unequal '
                                   'matrices')
            return found
        found = Factorization(matrix, tolerance=self.tolerance)
        self._store[key] = found
        return found

    @property
    def factorizations(self):
        return len(self._store)

    @property
    def factor_time(self):
        return sum(f.factor_time for f in self._store.values())

    @property
    def solve_time(self):
        return sum(f.solve_time for f in self._store.values())
