"""Independent reference computations used only by the tests."""

import numpy as np


def inverse_power_min_eig(H, iters=500, seed=0):
    """Smallest eigenvalue of a Hermitian matrix by shifted inverse iteration.

    The shift starts below the Gershgorin disc so the iteration converges to
    the bottom of the spectrum, then Rayleigh-quotient steps polish it.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    if n == 1:
        return float(H[0, 0].real)
    radius = np.max(np.sum(np.abs(H), axis=1))
    sigma = -radius - 1.0
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    x /= np.linalg.norm(x)
    eye = np.eye(n)
    for _ in range(iters):
        x = np.linalg.solve(H - sigma * eye, x)
        x /= np.linalg.norm(x)
    rq = float(np.real(x.conj() @ H @ x))
    for _ in range(5):
        shifted = H - rq * eye
        try:
            y = np.linalg.solve(shifted, x)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) == 0:
            break
        x = y / np.linalg.norm(y)
        new = float(np.real(x.conj() @ H @ x))
        if abs(new - rq) < 1e-15 * (1 + abs(rq)):
            rq = new
            break
        rq = new
    return rq


def random_hermitian(n, rng, scale=1.0):
    A = rng.normal(scale=scale, size=(n, n)) + 1j * rng.normal(scale=scale, size=(n, n))
    return 0.5 * (A + A.conj().T)


def central_difference(fn, x, h):
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (fn(xp) - fn(xm)) / (2 * h)
    return g
