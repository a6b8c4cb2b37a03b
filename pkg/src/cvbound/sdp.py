"""Small dense primal-dual interior point solver for linear matrix inequalities.

Solves

    maximize    c^T y
    subject to  F0 + sum_i y_i F_i  >= 0      (block diagonal, real symmetric)

together with its conic dual

    minimize    <F0, X>
    subject to  <F_i, X> = -c_i,  X >= 0,

using an infeasible-start path-following method with the HKM search
direction and Mehrotra's predictor-corrector. Problems here have a few dozen
variables and blocks of size <= 16, so everything is dense numpy.

Both bounds reported are certified rather than read off the iterates: the
lower bound only counts points y whose slack is positive semidefinite when
recomputed from scratch, and the upper bound only counts dual matrices that
stay positive semidefinite after being projected exactly onto the equality
constraints. Near the optimum the Schur complement becomes badly
conditioned and the iterates drift off the equality constraints; the
projection keeps the bracket honest regardless.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

OPTIMAL = "optimal"
STOPPED = "stopped"
MAX_ITER = "max_iter"
STALLED = "stalled"


@dataclass
class LMIProblem:
    """maximize c @ y subject to f0[b] + sum_i y[i] * fi[b][i] >= 0 for every block b."""

    c: np.ndarray
    f0: list
    fi: list

    @property
    def m(self):
        return self.c.shape[0]

    def slack(self, y):
        return [f0 + np.tensordot(y, fi, axes=1) for f0, fi in zip(self.f0, self.fi)]


@dataclass
class LMISolution:
    status: str
    y: np.ndarray  # best certified point (slack >= 0), or last iterate if none
    lower: float  # c @ y for a certified y, -inf if none was found
    upper: float  # certified upper bound on the optimum, +inf if none was found
    iterations: int

    @property
    def gap(self):
        return self.upper - self.lower


def _max_step(mat, dmat):
    """Largest alpha with mat + alpha * dmat still positive semidefinite."""
    step = np.inf
    for m, d in zip(mat, dmat):
        inv = np.linalg.inv(np.linalg.cholesky(m))
        lam = np.linalg.eigvalsh(inv @ d @ inv.T)[0]
        if lam < 0:
            step = min(step, -1.0 / lam)
    return step


def _inner(a, b):
    return sum(float(np.vdot(x, y)) for x, y in zip(a, b))


def _min_eig(blocks):
    return min(np.linalg.eigvalsh(b)[0] for b in blocks)


def solve_lmi(problem, tol=1e-9, max_iter=100, monitor=None):
    """Run the interior point method on ``problem``.

    Stops when the certified bracket satisfies
    ``upper - lower <= tol * (1 + |lower|)``. ``monitor(y, upper)`` is called
    once per iteration with the current iterate and the best certified upper
    bound so far and may return True to stop early (status STOPPED); the
    feasibility checks in the certifier use this to return as soon as the
    sign of the optimum is settled.
    """
    c = np.asarray(problem.c, dtype=float)
    m = c.shape[0]
    # standard form: Z = C - sum y_i A_i with C = F0, A_i = -F_i, b = c
    cmat = [np.asarray(f, dtype=float) for f in problem.f0]
    amat = [-np.asarray(f, dtype=float) for f in problem.fi]
    sizes = [blk.shape[0] for blk in cmat]
    n_total = sum(sizes)

    gram = sum(a.reshape(m, -1) @ a.reshape(m, -1).T for a in amat)
    gram_inv = np.linalg.pinv(gram)

    a_norm = max(1.0, max(np.abs(a).max() for a in amat))
    c_norm = max(1.0, max(np.abs(blk).max() for blk in cmat))
    b_norm = max(1.0, np.abs(c).max())
    xi = max(10.0, np.sqrt(n_total), n_total * b_norm / a_norm)
    eta = max(10.0, np.sqrt(n_total), a_norm, c_norm)
    x = [xi * np.eye(s) for s in sizes]
    z = [eta * np.eye(s) for s in sizes]
    y = np.zeros(m)

    def a_op(mats):
        return sum(np.einsum("kij,ji->k", a, w) for a, w in zip(amat, mats))

    def at_op(v):
        return [np.tensordot(v, a, axes=1) for a in amat]

    lower, upper = -np.inf, np.inf
    best_y = None
    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        rp = c - a_op(x)
        aty = at_op(y)

        # certified bounds at this iterate
        if c @ y > lower and _min_eig([cb - ab for cb, ab in zip(cmat, aty)]) >= 0.0:
            lower = float(c @ y)
            best_y = y.copy()
        x_proj = [xb + g for xb, g in zip(x, at_op(gram_inv @ rp))]
        if _min_eig(x_proj) >= 0.0:
            upper = min(upper, _inner(cmat, x_proj))

        if monitor is not None and monitor(y, upper):
            status = STOPPED
            break
        if np.isfinite(lower) and upper - lower <= tol * (1.0 + abs(lower)):
            status = OPTIMAL
            break

        try:
            zinv = [np.linalg.inv(blk) for blk in z]
            rd = [cb - zb - ab for cb, zb, ab in zip(cmat, z, aty)]
            mu = _inner(x, z) / n_total

            # Schur complement M_ij = tr(A_i X A_j Z^-1)
            schur = np.zeros((m, m))
            for a, xb, zi in zip(amat, x, zinv):
                p = a @ xb
                q = a @ zi
                schur += p.reshape(m, -1) @ q.transpose(0, 2, 1).reshape(m, -1).T
            schur = 0.5 * (schur + schur.T)
            try:
                chol = np.linalg.cholesky(schur)

                def solve(rhs):
                    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))

            except np.linalg.LinAlgError:
                # positive definite in exact arithmetic; rounding can break Cholesky
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                    lu = scipy.linalg.lu_factor(schur, check_finite=False)
                if not np.all(np.isfinite(lu[0])) or np.any(np.diag(lu[0]) == 0.0):
                    raise np.linalg.LinAlgError("singular Schur complement")

                def solve(rhs):
                    return scipy.linalg.lu_solve(lu, rhs, check_finite=False)

            x_rd_zinv = [xb @ r @ zi for xb, r, zi in zip(x, rd, zinv)]

            def direction(centering):
                # centering[b] = (sigma mu I - second order term) Z^-1
                w = [cen - xb - xrz for cen, xb, xrz in zip(centering, x, x_rd_zinv)]
                dy = solve(rp - a_op(w))
                dz = [r - g for r, g in zip(rd, at_op(dy))]
                dx = [cen - xb - xb @ dzb @ zi for cen, xb, dzb, zi in zip(centering, x, dz, zinv)]
                dx = [0.5 * (d + d.T) for d in dx]
                # keep A(X + dX) = b despite an inaccurate Schur solve
                fix = at_op(gram_inv @ (rp - a_op(dx)))
                return [d + f for d, f in zip(dx, fix)], dy, dz

            dx_a, _, dz_a = direction([np.zeros_like(xb) for xb in x])
            ap = min(1.0, _max_step(x, dx_a))
            ad = min(1.0, _max_step(z, dz_a))
            mu_aff = _inner(
                [xb + ap * d for xb, d in zip(x, dx_a)], [zb + ad * d for zb, d in zip(z, dz_a)]
            ) / n_total
            sigma = min(1.0, (mu_aff / mu) ** 3)
            centering = [
                (sigma * mu * np.eye(s) - dxb @ dzb) @ zi
                for s, dxb, dzb, zi in zip(sizes, dx_a, dz_a, zinv)
            ]
            dx, dy, dz = direction(centering)
            ap = min(1.0, 0.98 * _max_step(x, dx))
            ad = min(1.0, 0.98 * _max_step(z, dz))
        except np.linalg.LinAlgError:
            status = STALLED
            break
        x = [xb + ap * d for xb, d in zip(x, dx)]
        y = y + ad * dy
        z = [zb + ad * d for zb, d in zip(z, dz)]
        z = [0.5 * (zb + zb.T) for zb in z]

    return LMISolution(
        status=status,
        y=best_y if best_y is not None else y,
        lower=lower,
        upper=upper,
        iterations=it,
    )
