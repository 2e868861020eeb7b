import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .errors import SingularBlock

RCOND_MIN = 1e-12


def factor(a, name="matrix"):
    """Pivoted LU of ``a``; raises SingularBlock when rcond < RCOND_MIN."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return None
    lu, piv = lu_factor(a, check_finite=True)
    anorm = np.abs(a).sum(axis=0).max()
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise SingularBlock(name, rcond)
    return lu, piv


def solve(a, b, name="matrix"):
    b = np.asarray(b, dtype=float)
    f = factor(a, name)
    if f is None:
        return np.zeros((0,) + b.shape[1:])
    return lu_solve(f, b)
