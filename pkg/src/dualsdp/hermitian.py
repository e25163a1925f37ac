"""Dense Hermitian helpers: minimum eigenpair and its derivative.

Hermitian matrices are plain ``complex128`` arrays of shape ``(n, n)``. The
eigensolver works on the real symmetric embedding ``[[A, -B], [B, A]]`` of
``H = A + jB``, where every eigenvalue of ``H`` appears twice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SWEEPS = 100
CONV_TOL = 1e-12
DEGENERACY_GAP = 1e-9
# above this order the LAPACK backend is used by default
JACOBI_MAX_ORDER = 16


class EigenConvergenceError(ArithmeticError):
    def __init__(self, sweeps: int, off_norm: float):
        self.sweeps = sweeps
        self.off_norm = off_norm
        super().__init__(f"Jacobi did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")


@dataclass(frozen=True)
class MinEigPair:
    lambda_min: float
    eigvec: np.ndarray
    gap: float

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_GAP


def hermitian(real_part, imag_part=None) -> np.ndarray:
    """Assemble ``A + jB`` from a symmetric ``A`` and a skew-symmetric ``B``.

    Only the upper triangles are read, so the result is exactly Hermitian.
    """
    A = np.asarray(real_part, dtype=float)
    n = A.shape[0]
    iu = np.triu_indices(n, 1)
    H = np.zeros((n, n), dtype=complex)
    H[np.diag_indices(n)] = np.diag(A)
    upper = A[iu].astype(complex)
    if imag_part is not None:
        upper = upper + 1j * np.asarray(imag_part, dtype=float)[iu]
    H[iu] = upper
    H[iu[1], iu[0]] = upper.conj()
    return H


def herm_add_scaled(H: np.ndarray, c: float) -> np.ndarray:
    """``H + c I``; the off-diagonal part is copied untouched."""
    out = np.array(H, dtype=complex, copy=True)
    if c != 0.0:
        idx = np.diag_indices(out.shape[0])
        out[idx] = out[idx].real + c
    return out


def real_embedding(H: np.ndarray) -> np.ndarray:
    A, B = H.real, H.imag
    return np.block([[A, -B], [B, A]])


def _round_robin(m: int):
    """Pairings of ``m`` (even) indices such that every pair meets once per sweep."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        p = np.array(players[:half], dtype=np.intp)
        q = np.array(players[half:][::-1], dtype=np.intp)
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(A: np.ndarray) -> float:
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_eigh(M: np.ndarray, tol: float = CONV_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.

    Each sweep is split into rounds of disjoint rotations (round-robin
    ordering); a round is applied as one dense orthogonal similarity, which is
    cheap at the small orders this is used for. Returns ``(values, vectors)``
    sorted ascending; columns of ``vectors`` are orthonormal eigenvectors.
    """
    A = np.array(M, dtype=float, copy=True)
    m = A.shape[0]
    V = np.eye(m)
    if m == 1:
        return A.diagonal().copy(), V
    pad = m % 2
    if pad:
        # dummy row/column that never couples to anything
        A = np.pad(A, ((0, 1), (0, 1)))
        V = np.eye(m + 1)
    size = A.shape[0]
    rounds = _round_robin(size)
    fro = np.linalg.norm(A)
    thresh = tol * max(fro, np.finfo(float).tiny)
    sweeps = 0
    off = _off_norm(A)
    while off > thresh:
        if sweeps >= max_sweeps:
            raise EigenConvergenceError(sweeps, off)
        for p, q in rounds:
            apq = A[p, q]
            theta = np.where(apq != 0.0, 0.5 * np.arctan2(2.0 * apq, A[p, p] - A[q, q]), 0.0)
            c, s = np.cos(theta), np.sin(theta)
            # the rotations of one round are disjoint, so they form one orthogonal matrix
            R = np.zeros((size, size))
            R[p, p] = c
            R[q, q] = c
            R[q, p] = s
            R[p, q] = -s
            A = R.T @ A @ R
            V = V @ R
        sweeps += 1
        off = _off_norm(A)
    w = A.diagonal().copy()
    if pad:
        w, V = w[:m], V[:m, :m]
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    v[k] = abs(v[k])
    return v


def min_eig(H: np.ndarray, method: str = "auto") -> MinEigPair:
    """Smallest eigenvalue of a Hermitian matrix with a unit eigenvector.

    ``method`` is ``"jacobi"`` (real embedding + cyclic Jacobi), ``"lapack"``
    (``numpy.linalg.eigh``) or ``"auto"``, which picks Jacobi for orders up to
    ``JACOBI_MAX_ORDER``. The eigenvector is normalised so its largest-magnitude
    entry is real and positive.
    """
    H = np.asarray(H)
    n = H.shape[0]
    if n < 1 or H.shape != (n, n):
        raise ValueError(f"expected a non-empty square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_ORDER else "lapack"
    if method == "jacobi":
        w, X = jacobi_eigh(real_embedding(H))
        v = X[:n, 0] + 1j * X[n:, 0]
        lam = float(w[0])
        gap = float(w[2] - w[0]) if n > 1 else np.inf
    elif method == "lapack":
        w, X = np.linalg.eigh(H)
        v = X[:, 0]
        lam = float(w[0])
        gap = float(w[1] - w[0]) if n > 1 else np.inf
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    return MinEigPair(lambda_min=lam, eigvec=_canonical_phase(v), gap=gap)


def d_lambda_min(pair: MinEigPair) -> np.ndarray:
    """Gradient ``v v^H`` of the smallest eigenvalue.

    With this matrix ``G``, ``d lambda_min = Re sum(conj(G) * dH)`` for a
    Hermitian perturbation ``dH``. At a repeated eigenvalue it is one valid
    subgradient.
    """
    v = pair.eigvec
    return np.outer(v, v.conj())


def frob_inner(G: np.ndarray, D: np.ndarray) -> float:
    """Real inner product ``Re tr(G^H D)`` between Hermitian matrices."""
    return float(np.sum(G.real * D.real) + np.sum(G.imag * D.imag))
