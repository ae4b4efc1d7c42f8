"""Small dense linear-algebra helpers.

``jacobi_eigh`` is a cyclic Jacobi rotation eigensolver for real symmetric
matrices.  It is deliberately independent of LAPACK so that the closed-form
spectra can be checked against a route that shares no code with them.
"""

import numpy as np


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(w, V)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``V``.  Sweeps stop once the off-diagonal
    Frobenius norm falls below ``tol`` times the matrix norm.
    """
    A = np.array(a, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * (1 + np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0 or n == 1:
        return np.diag(A).copy(), V

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # rotation angle zeroing A[p, q] (Golub & Van Loan, Alg. 8.4.1)
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise RuntimeError("Jacobi sweeps did not converge")

    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def multiset_distance(a, b):
    """Largest gap between two real multisets after sorting both."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.shape != b.shape:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def complex_multiset_distance(a, b):
    """Largest gap under a greedy nearest-neighbour pairing of complex values."""
    a = list(np.asarray(a, dtype=complex).ravel())
    b = list(np.asarray(b, dtype=complex).ravel())
    if len(a) != len(b):
        raise ValueError(f"multisets differ in size: {len(a)} vs {len(b)}")
    worst = 0.0
    remaining = np.array(b)
    for z in sorted(a, key=lambda x: (x.real, x.imag)):
        k = int(np.argmin(np.abs(remaining - z)))
        worst = max(worst, float(abs(remaining[k] - z)))
        remaining = np.delete(remaining, k)
    return worst


def signature(values, tol):
    """Counts ``(zero, negative, positive)`` with ``|x| <= tol`` counted as zero."""
    v = np.asarray(values, dtype=float)
    zero = int(np.sum(np.abs(v) <= tol))
    neg = int(np.sum(v < -tol))
    pos = int(np.sum(v > tol))
    return zero, neg, pos
