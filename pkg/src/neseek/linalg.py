"""Small dense linear-algebra kernel.

Matrices are plain 2-D ``float`` numpy arrays. Everything here is a pure
function; the heavy lifting (LU, Hessenberg/QR eigenvalues, pivoted QR) is
delegated to LAPACK through numpy/scipy.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

PIVOT_TOL = 1e-12
HURWITZ_MARGIN = 1e-9
RANK_RTOL = 1e-9


class SingularMatrixError(ArithmeticError):
    """Raised when an LU pivot falls below :data:`PIVOT_TOL`."""


class EigenvalueError(ArithmeticError):
    """Raised when the QR iteration fails to converge."""


class DimensionError(ValueError):
    pass


def as_matrix(a: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _square(a: ArrayLike, name: str = "a") -> NDArray[np.float64]:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def solve(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Solve ``a @ x = b`` by partially pivoted LU.

    Raises:
        SingularMatrixError: if any pivot magnitude is below 1e-12.
    """
    a = _square(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} does not match {a.shape}")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < PIVOT_TOL:
        raise SingularMatrixError(f"pivot {pivots.min():.3e} below {PIVOT_TOL:g}")
    return sla.lu_solve((lu, piv), b)


def eigenvalues(a: ArrayLike) -> NDArray[np.complex128]:
    """All eigenvalues of a square matrix, with multiplicity."""
    a = _square(a)
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(str(exc)) from exc
    return lam.astype(complex)


def spectral_abscissa(a: ArrayLike) -> float:
    """Largest real part over the spectrum of ``a``."""
    lam = eigenvalues(a)
    return float(lam.real.max()) if lam.size else -np.inf


def is_hurwitz(a: ArrayLike, margin: float = HURWITZ_MARGIN) -> bool:
    return spectral_abscissa(a) < -margin


def rank(a: ArrayLike, rtol: float = RANK_RTOL) -> int:
    """Numerical rank from column-pivoted QR.

    A diagonal entry of R counts when it exceeds ``rtol * max(1, |R[0,0]|)``.
    """
    a = as_matrix(a)
    if a.size == 0:
        return 0
    r = sla.qr(a, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d > rtol * max(1.0, d[0])))


def controllability_matrix(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    a = _square(a)
    b = as_matrix(b, "b")
    if b.shape[0] != a.shape[0]:
        b = b.T
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"b rows {b.shape[0]} do not match a {a.shape}")
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def controllable(a: ArrayLike, b: ArrayLike) -> bool:
    """Kalman rank test on ``[b, ab, ..., a^(n-1) b]``."""
    a = _square(a)
    return rank(controllability_matrix(a, b)) == a.shape[0]


def observable(a: ArrayLike, c: ArrayLike) -> bool:
    """Kalman rank test through the dual pair ``(a.T, c.T)``."""
    a = _square(a)
    c = as_matrix(c, "c")
    if c.shape[1] != a.shape[0]:
        raise DimensionError(f"c columns {c.shape[1]} do not match a {a.shape}")
    return controllable(a.T, c.T)


def place_poles(a: ArrayLike, b: ArrayLike, poles) -> NDArray[np.float64]:
    """Single-input pole placement by Ackermann's formula.

    Returns the 1×n gain ``k`` such that ``a - b @ k`` has the requested
    eigenvalues. Complex poles must come in conjugate pairs.
    """
    a = _square(a)
    b = as_matrix(b, "b").reshape(-1, 1)
    n = a.shape[0]
    poles = np.asarray(poles, dtype=complex)
    if poles.size != n:
        raise DimensionError(f"need {n} poles, got {poles.size}")
    if not controllable(a, b):
        raise ValueError("pair (a, b) is not controllable")
    coeffs = np.real_if_close(np.poly(poles))
    if np.iscomplexobj(coeffs):
        raise ValueError("poles must be closed under conjugation")
    phi = np.zeros_like(a)
    for c in coeffs:
        phi = phi @ a + c * np.eye(n)
    last = np.zeros((1, n))
    last[0, -1] = 1.0
    # k = e_n^T Ctrb^{-1} phi(a)
    return solve(controllability_matrix(a, b).T, last.T).T @ phi


def place_poles_controllable(a: ArrayLike, b: ArrayLike, poles) -> NDArray[np.float64]:
    """Place the poles of the controllable part of ``(a, b)``.

    ``poles`` must match the dimension of the controllable subspace; the
    uncontrollable modes keep their open-loop eigenvalues.
    """
    a = _square(a)
    b = as_matrix(b, "b").reshape(-1, 1)
    wc = controllability_matrix(a, b)
    r = rank(wc)
    poles = np.asarray(poles, dtype=complex)
    if poles.size != r:
        raise DimensionError(f"controllable subspace has dimension {r}, got {poles.size} poles")
    basis = np.linalg.svd(wc)[0]
    a_bar = basis.T @ a @ basis
    b_bar = basis.T @ b
    k_c = place_poles(a_bar[:r, :r], b_bar[:r], poles)
    k_bar = np.hstack([k_c, np.zeros((1, a.shape[0] - r))])
    return k_bar @ basis.T
