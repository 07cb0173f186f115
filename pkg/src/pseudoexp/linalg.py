"""Dense complex linear algebra kernel.

Everything downstream works with plain ``numpy.ndarray`` matrices of dtype
complex128.  Desk scale only: matrix dimensions are small (a few dozen at
most), so the solvers favour transparency over asymptotics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoSolutionError

__all__ = [
    "as_matrix",
    "adjoint",
    "fro",
    "kron",
    "mat_exp",
    "solve_sylvester",
    "solve_pivoted",
    "eigenvalues",
    "SpectrumInfo",
    "pivoted_rank",
    "full_range_rank",
    "lyapunov_separation",
]

# Residual bound for solve_sylvester, relative to 1 + ||Q||_F.
SYLVESTER_TOL = 1e-10
# A pivot below PIVOT_RTOL * ||S||_F marks the system singular.
PIVOT_RTOL = 1e-12
# Column-pivoting rank threshold, relative to the largest column norm.
RANK_RTOL = 1e-10

_EIG_MAX_DIM = 32


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting non-finite entries."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def adjoint(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return m.conj().T


def fro(m: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(m))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices."""
    return np.kron(a, b)


def _taylor_exp(m: np.ndarray, terms: int) -> np.ndarray:
    # Horner form of sum_{k<=terms} m^k / k!
    n = m.shape[0]
    acc = np.eye(n, dtype=complex)
    for k in range(terms, 0, -1):
        acc = np.eye(n, dtype=complex) + (m @ acc) / k
    return acc


def _nilpotent_index(m: np.ndarray) -> int | None:
    # Smallest k <= dim with m^k exactly zero, else None.
    n = m.shape[0]
    p = m
    for k in range(1, n + 1):
        if not p.any():
            return k
        p = p @ m
    return None


def mat_exp(m) -> np.ndarray:
    """Matrix exponential exp(m).

    Nilpotent inputs (m**k == 0 exactly for some k <= dim) take an exact
    finite Taylor sum.  Otherwise scaling-and-squaring with a degree-16
    Taylor polynomial at ||m/2^s||_1 <= 1/2; the truncation error is below
    double roundoff at that radius.

    Parameters
    ----------
    m : array_like
        Square complex matrix.

    Returns
    -------
    numpy.ndarray
    """
    m = as_matrix(m, "mat_exp argument")
    n, nc = m.shape
    if n != nc:
        raise ValueError(f"mat_exp needs a square matrix, got {m.shape}")
    if n == 0:
        return np.zeros((0, 0), dtype=complex)

    k = _nilpotent_index(m)
    if k is not None:
        out = np.eye(n, dtype=complex)
        p = np.eye(n, dtype=complex)
        factorial = 1.0
        for j in range(1, k):
            p = p @ m
            factorial *= j
            out = out + p / factorial
        return out

    norm = np.linalg.norm(m, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5))))
    e = _taylor_exp(m / (2.0**squarings), 16)
    for _ in range(squarings):
        e = e @ e
    return e


def solve_sylvester(a, b, q, tol: float = SYLVESTER_TOL) -> np.ndarray:
    """Solve A X + X B = Q by Kronecker vectorization.

    The linear system (I (x) A + B^T (x) I) vec X = vec Q (column-major vec)
    is solved directly when well posed and by least squares otherwise, which
    yields the minimum-norm solution of singular-but-consistent systems.
    When B = A* and Q = Q* the result is symmetrized, X <- (X + X*)/2.

    Parameters
    ----------
    a, b, q : array_like
        Shapes (N, N), (M, M), (N, M).
    tol : float
        Accept X only if ||A X + X B - Q||_F <= tol * (1 + ||Q||_F).

    Returns
    -------
    numpy.ndarray
        Solution X of shape (N, M).

    Raises
    ------
    NoSolutionError
        If no X meets the residual bound (inconsistent singular system);
        the exception carries the least-squares residual.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    q = as_matrix(q, "Q")
    n, nc = a.shape
    m, mc = b.shape
    if n != nc or m != mc:
        raise ValueError("A and B must be square")
    if q.shape != (n, m):
        raise ValueError(f"Q must have shape {(n, m)}, got {q.shape}")

    hermitian_case = (
        n == m and np.array_equal(b, a.conj().T) and fro(q - adjoint(q)) <= 1e-12 * (1.0 + fro(q))
    )

    k = np.kron(np.eye(m, dtype=complex), a) + np.kron(b.T, np.eye(n, dtype=complex))
    rhs = q.reshape(-1, order="F")
    bound = tol * (1.0 + fro(q))

    def finish(x_flat: np.ndarray) -> np.ndarray | None:
        x = x_flat.reshape((n, m), order="F")
        if hermitian_case:
            x = (x + adjoint(x)) / 2.0
        if fro(a @ x + x @ b - q) <= bound:
            return x
        return None

    try:
        x = finish(np.linalg.solve(k, rhs))
        if x is not None:
            return x
    except np.linalg.LinAlgError:
        pass

    x_flat, *_ = np.linalg.lstsq(k, rhs, rcond=None)
    x = finish(x_flat)
    if x is not None:
        return x
    residual = fro(a @ x_flat.reshape((n, m), order="F") + x_flat.reshape((n, m), order="F") @ b - q)
    raise NoSolutionError(
        f"sylvester system has no solution within tolerance (residual {residual:.3e})",
        residual,
    )


def solve_pivoted(s, rhs, pivot_rtol: float = PIVOT_RTOL) -> np.ndarray | None:
    """Solve S X = RHS by Gaussian elimination with partial pivoting.

    Returns None (the singular flag) as soon as a pivot magnitude falls below
    ``pivot_rtol * ||S||_F``; callers mask such points rather than handle an
    exception.
    """
    s = as_matrix(s, "S")
    rhs = as_matrix(rhs, "RHS")
    n, nc = s.shape
    if n != nc:
        raise ValueError("S must be square")
    if rhs.shape[0] != n:
        raise ValueError(f"RHS must have {n} rows, got {rhs.shape[0]}")

    snorm = fro(s)
    if snorm == 0.0:
        return None
    threshold = pivot_rtol * snorm

    u = s.copy()
    y = rhs.astype(complex, copy=True)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(u[col:, col])))
        if abs(u[piv, col]) < threshold:
            return None
        if piv != col:
            u[[col, piv]] = u[[piv, col]]
            y[[col, piv]] = y[[piv, col]]
        factors = u[col + 1 :, col] / u[col, col]
        u[col + 1 :, col:] -= np.outer(factors, u[col, col:])
        y[col + 1 :] -= np.outer(factors, y[col])

    x = np.zeros_like(y)
    for row in range(n - 1, -1, -1):
        x[row] = (y[row] - u[row, row + 1 :] @ x[row + 1 :]) / u[row, row]
    return x


@dataclass(frozen=True)
class SpectrumInfo:
    """Eigenvalues with a computable quality certificate.

    ``residual_bound`` is the largest ||(A - lambda I) v|| over the witness
    directions v used to certify each eigenvalue.
    """

    values: np.ndarray
    method: str
    residual_bound: float


def _charpoly_coeffs(a: np.ndarray) -> np.ndarray:
    # Faddeev-LeVerrier: coefficients of det(lambda I - A), highest first.
    n = a.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    mk = np.zeros_like(a)
    for k in range(1, n + 1):
        mk = a @ (mk + coeffs[k - 1] * np.eye(n, dtype=complex))
        coeffs[k] = -np.trace(mk) / k
    return coeffs


def _durand_kerner(coeffs: np.ndarray, iters: int = 200) -> np.ndarray:
    # Simultaneous root iteration for a monic polynomial.
    n = len(coeffs) - 1
    roots = (0.4 + 0.9j) ** np.arange(1, n + 1)
    scale = 1.0 + max(abs(c) for c in coeffs)
    roots = roots * scale

    def poly(z):
        val = np.zeros_like(z)
        for c in coeffs:
            val = val * z + c
        return val

    for _ in range(iters):
        deltas = np.zeros_like(roots)
        for i in range(n):
            denom = np.prod(roots[i] - np.delete(roots, i)) if n > 1 else 1.0
            deltas[i] = poly(np.array([roots[i]]))[0] / denom
        roots = roots - deltas
        if np.max(np.abs(deltas)) < 1e-14 * scale:
            break
    return roots


def _sorted_values(w: np.ndarray) -> np.ndarray:
    order = np.lexsort((w.imag, w.real))
    return w[order]


def eigenvalues(a) -> SpectrumInfo:
    """Eigenvalues of a square matrix (dimension <= 32), with certificate.

    Shifted-QR (LAPACK) is the primary path; on QR failure a Durand-Kerner
    iteration on the characteristic polynomial takes over for dimensions up
    to 12.  Spectra are for hypothesis checks only, so moderate accuracy on
    defective matrices is acceptable and reflected in the residual bound.
    """
    a = as_matrix(a, "A")
    n, nc = a.shape
    if n != nc:
        raise ValueError("eigenvalues needs a square matrix")
    if n > _EIG_MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the supported maximum {_EIG_MAX_DIM}")
    if n == 0:
        return SpectrumInfo(np.zeros(0, dtype=complex), "qr", 0.0)

    try:
        w, v = np.linalg.eig(a)
        residual = 0.0
        for i in range(n):
            vec = v[:, i]
            nrm = np.linalg.norm(vec)
            if nrm > 0:
                residual = max(residual, float(np.linalg.norm(a @ vec - w[i] * vec) / nrm))
        return SpectrumInfo(_sorted_values(w), "qr", residual)
    except np.linalg.LinAlgError:
        if n > 12:
            raise
        w = _durand_kerner(_charpoly_coeffs(a))
        residual = 0.0
        for lam in w:
            sigma = np.linalg.svd(a - lam * np.eye(n), compute_uv=False)
            residual = max(residual, float(sigma[-1]))
        return SpectrumInfo(_sorted_values(w), "durand-kerner", residual)


def pivoted_rank(m, rel_tol: float = RANK_RTOL) -> int:
    """Numerical rank via column-pivoted Gram-Schmidt.

    Columns whose remaining norm stays above ``rel_tol`` times the largest
    initial column norm count toward the rank.
    """
    m = as_matrix(m, "matrix")
    if m.size == 0:
        return 0
    cols = m.copy()
    norms = np.linalg.norm(cols, axis=0)
    threshold = rel_tol * float(norms.max())
    rank = 0
    alive = np.ones(cols.shape[1], dtype=bool)
    for _ in range(min(cols.shape)):
        norms = np.linalg.norm(cols, axis=0)
        norms[~alive] = -1.0
        j = int(np.argmax(norms))
        if norms[j] <= threshold:
            break
        rank += 1
        q = cols[:, j] / norms[j]
        alive[j] = False
        coeffs = q.conj() @ cols
        coeffs[~alive] = 0.0
        cols -= np.outer(q, coeffs)
    return rank


def full_range_rank(a, chat) -> int:
    """Rank of the block matrix [chat, A chat, ..., A^(N-1) chat].

    Equals N exactly when the pair (A, chat) is full range (controllable).
    """
    a = as_matrix(a, "A")
    chat = as_matrix(chat, "chat")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("A must be square")
    if chat.shape[0] != n:
        raise ValueError("chat must have as many rows as A")
    blocks = []
    p = chat
    for _ in range(n):
        blocks.append(p)
        p = a @ p
    return pivoted_rank(np.hstack(blocks))


def lyapunov_separation(values: np.ndarray) -> float:
    """min |lambda_i + conj(lambda_j)| over a spectrum.

    Positive iff sigma(A) and sigma(-A*) are disjoint, i.e. iff
    A R + R A* = Q has a unique solution.
    """
    w = np.asarray(values, dtype=complex)
    if w.size == 0:
        return np.inf
    grid = w[:, None] + w[None, :].conj()
    return float(np.min(np.abs(grid)))
