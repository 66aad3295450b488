"""
Dense primal simplex for small linear programs

    maximize c.x  subject to  A x <= b,  x >= 0,  with b >= 0.

The slack basis is feasible because b >= 0, so a single phase suffices. The
tableau is kept in compact (Tucker) form: one column per nonbasic variable,
one row per basic variable. Variables are labelled 0..n-1 (structural) and
n..n+m-1 (slacks); Bland's rule picks the lowest label both when entering
and when breaking ratio-test ties.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from apps.core.arrays import frozen
from apps.core.exceptions import LPStallError, UnboundedLPError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
COST_TOL = 1e-12
RATIO_TOL = 1e-12
MAX_PIVOTS = 50000


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = frozen(self.c, ndim=1)
        A = frozen(np.asarray(self.A, dtype=float).reshape(-1, c.size), ndim=2)
        b = frozen(self.b, ndim=1)
        if A.shape[0] != b.size:
            raise ValueError("Need one right-hand side per constraint row.")
        for name, arr in (('c', c), ('A', A), ('b', b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"LP data '{name}' must be finite.")
        if np.any(b < 0):
            raise ValueError("Right-hand sides must be nonnegative (x = 0 feasible).")
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)

    @property
    def shape(self):
        return self.A.shape


@dataclass(frozen=True, eq=False)
class LPSolution:
    value: float
    x: np.ndarray
    basis: tuple
    binding: tuple
    duals: np.ndarray
    iterations: int


class _Tableau:
    def __init__(self, lp):
        m, n = lp.shape
        self.m, self.n = m, n
        self.A = np.array(lp.A, dtype=float)
        self.b = np.array(lp.b, dtype=float)
        self.c = np.array(lp.c, dtype=float)
        self.value = 0.0
        self.nb_vars = np.arange(n)
        self.b_vars = np.arange(n, n + m)

    def pivot(self, i, j):
        piv = self.A[i, j]
        row = self.A[i].copy()
        delta = self.c[j] / piv
        self.value += delta * self.b[i]

        self.c -= delta * row
        self.c[j] = -delta

        new_row = row / piv
        new_row[j] = 1.0 / piv
        b_i = self.b[i] / piv

        col = self.A[:, j].copy()
        col[i] = 0.0
        self.A -= np.outer(col, new_row)
        self.A[:, j] = -col / piv
        self.b -= col * b_i
        self.A[i] = new_row
        self.b[i] = b_i
        # rounding can push a zero right-hand side slightly negative
        np.maximum(self.b, 0.0, out=self.b)

        self.nb_vars[j], self.b_vars[i] = self.b_vars[i], self.nb_vars[j]

    def bland_primal_step(self):
        improving = np.flatnonzero(self.c > COST_TOL)
        if improving.size == 0:
            return 'optimal'
        j = int(improving[np.argmin(self.nb_vars[improving])])
        rows = np.flatnonzero(self.A[:, j] > PIVOT_TOL)
        if rows.size == 0:
            return 'unbounded'
        ratios = self.b[rows] / self.A[rows, j]
        best = ratios.min()
        tied = rows[ratios <= best + RATIO_TOL * max(1.0, abs(best))]
        i = int(tied[np.argmin(self.b_vars[tied])])
        self.pivot(i, j)
        return 'go_on'

    def dump(self):
        return {
            'basic': self.b_vars.tolist(),
            'nonbasic': self.nb_vars.tolist(),
            'b': self.b.tolist(),
            'c': self.c.tolist(),
        }


def lp_solve(lp, max_pivots=MAX_PIVOTS):
    """
    Solve ``lp`` by the primal simplex method with Bland's rule.

    Optimality means every reduced cost is <= COST_TOL. The duals are read
    off the final objective row.
    """
    tableau = _Tableau(lp)
    m, n = lp.shape
    for iteration in range(max_pivots + 1):
        status = tableau.bland_primal_step()
        if status == 'optimal':
            break
        if status == 'unbounded':
            raise UnboundedLPError(f"LP is unbounded after {iteration} pivots.")
    else:
        logger.error("simplex stalled after %d pivots", max_pivots)
        raise LPStallError(f"Simplex exceeded {max_pivots} pivots.", basis=tableau.dump())

    x = np.zeros(n + m)
    x[tableau.b_vars] = tableau.b
    duals = np.zeros(n + m)
    duals[tableau.nb_vars] = -tableau.c
    structural = x[:n].copy()
    binding = tuple(sorted(int(v) - n for v in tableau.nb_vars if v >= n))
    logger.debug("simplex: %d pivots, %d binding rows, value %.17g",
                 iteration, len(binding), tableau.value)
    structural.setflags(write=False)
    y = duals[n:].copy()
    y.setflags(write=False)
    return LPSolution(
        value=float(lp.c @ structural),
        x=structural,
        basis=tuple(int(v) for v in tableau.b_vars),
        binding=binding,
        duals=y,
        iterations=iteration,
    )


@dataclass(frozen=True)
class CertificateCheck:
    primal_residual: float
    dual_residual: float
    gap: float
    tol: float

    @property
    def passed(self):
        return max(self.primal_residual, self.dual_residual, self.gap) <= self.tol


def verify_lp_certificate(lp, solution, tol=1e-9):
    """
    Independent optimality check: primal feasibility of x, dual feasibility
    of y (y >= 0, A^T y >= c) and a vanishing duality gap, all relative to
    the scale of the data.
    """
    x, y = solution.x, solution.duals
    scale = max(1.0, float(np.abs(lp.b).max(initial=0.0)), float(np.abs(lp.c).max(initial=0.0)))
    primal = max(float((lp.A @ x - lp.b).max(initial=0.0)), float((-x).max(initial=0.0)), 0.0)
    reduced = lp.c - lp.A.T @ y
    dual = max(float(reduced.max(initial=0.0)), float((-y).max(initial=0.0)), 0.0)
    gap = abs(float(lp.c @ x) - float(lp.b @ y))
    return CertificateCheck(primal / scale, dual / scale, gap / scale, tol)


def enumerate_vertices(lp, chunk=20000, tol=1e-9):
    """
    Brute-force optimum: every choice of n tight constraints among the rows
    of A and the bounds x >= 0, solved in batches. Small problems only.
    """
    m, n = lp.shape
    rows = np.vstack([lp.A, -np.eye(n)])
    rhs = np.concatenate([lp.b, np.zeros(n)])
    best_value, best_x = -math.inf, None
    combos = itertools.combinations(range(m + n), n)
    while True:
        batch = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if batch.size == 0:
            break
        mats = rows[batch]
        vecs = rhs[batch]
        regular = np.abs(np.linalg.det(mats)) > 1e-12
        if not regular.any():
            continue
        xs = np.linalg.solve(mats[regular], vecs[regular][..., None])[..., 0]
        feasible = np.all(xs @ rows.T <= rhs + tol * (1.0 + np.abs(rhs)), axis=1)
        if not feasible.any():
            continue
        values = xs[feasible] @ lp.c
        k = int(np.argmax(values))
        if values[k] > best_value:
            best_value, best_x = float(values[k]), xs[feasible][k]
    return best_value, best_x
