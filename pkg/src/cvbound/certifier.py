"""Entanglement and PPT measures for Gaussian states and their certification.

The entanglement measure is E = 1 - x*, where x* is the largest scale for
which local matrices gamma_A, gamma_B exist with

    gamma >= gamma_A (+) gamma_B,   gamma_A + i x sigma_A >= 0,   gamma_B + i x sigma_B >= 0.

E > 0 certifies entanglement across the partition. The PPT measure is
P = min eig(gamma^Gamma + i sigma); P > 0 certifies that the state cannot be
distilled.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import sdp
from .errors import Indeterminate, InvalidArgument, InvalidState
from .gaussian import (
    GaussianState,
    ModePartition,
    as_state,
    hermitian_embedding,
    hermitian_min_eig,
    partial_transpose,
    permute_modes,
    physicality_margin,
    symplectic_form,
)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INDETERMINATE = "indeterminate"

BOUND_ENTANGLED = "bound-entangled"
FREE_ENTANGLED = "free-entangled"
SEPARABLE_BOUNDARY = "separable-boundary"
SEPARABLE = "separable"
UNPHYSICAL = "unphysical"
UNDECIDED = "undecided"

DEFAULT_TOL = 1e-6
DEFAULT_FEAS_TOL = 1e-8
DEFAULT_MAX_ITER = 500
PHYSICAL_TOL = 1e-9


def ppt_measure(state, partition):
    """P(gamma): minimum eigenvalue of the partial transpose plus i sigma."""
    return physicality_margin(partial_transpose(state, partition))


@lru_cache(maxsize=None)
def _symmetric_basis(dim):
    """Basis of dim x dim symmetric matrices, one per upper-triangular entry."""
    rows, cols = np.triu_indices(dim)
    basis = np.zeros((rows.size, dim, dim))
    basis[np.arange(rows.size), rows, cols] = 1.0
    basis[np.arange(rows.size), cols, rows] = 1.0
    basis.setflags(write=False)
    return basis


def _unvec(values, dim):
    rows, cols = np.triu_indices(dim)
    mat = np.zeros((dim, dim))
    mat[rows, cols] = values
    mat[cols, rows] = values
    return mat


def _canonical(state, partition):
    """Covariance with party A's modes first, plus the two party sizes in quadratures."""
    state = as_state(state)
    partition.check(state.n_modes)
    order = list(partition.party_a) + list(partition.party_b)
    if order != list(range(1, state.n_modes + 1)):
        state = permute_modes(state, order)
    return state.cov, 2 * len(partition.party_a), 2 * len(partition.party_b)


def _local_williamson(block):
    """Symplectic S with S block S^T diagonal, or None if block is not positive definite.

    With M = block^(-1/2), the antisymmetric M sigma M has a real Schur form
    made of 2x2 blocks [[0, a], [-a, 0]]; rescaling the Schur vectors by
    a^(-1/2) gives S^T.
    """
    w, v = np.linalg.eigh(block)
    if not w[0] > 0:
        return None
    n = block.shape[0] // 2
    m = (v / np.sqrt(w)) @ v.T
    t, o = scipy.linalg.schur(m @ symplectic_form(n) @ m, output="real")
    a = t[np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)]
    for k in np.flatnonzero(a < 0):
        o[:, [2 * k, 2 * k + 1]] = o[:, [2 * k + 1, 2 * k]]
    a = np.abs(a)
    if not np.all(a > 0):
        return None
    s = (m @ o / np.sqrt(np.repeat(a, 2))).T
    return s if np.all(np.isfinite(s)) else None


def _precondition(cov, da, db):
    """Bring both reduced covariances to Williamson form by local symplectic maps.

    E is invariant under local symplectic maps (gamma_A maps along with the
    target and sigma is preserved), while ill-conditioned targets otherwise
    leave the feasibility margin unresolvable near the optimum. Returns the
    transformed covariance and the inverse maps used to pull witnesses back.
    """
    maps = []
    for sl in (slice(0, da), slice(da, da + db)):
        s = _local_williamson(cov[sl, sl])
        maps.append(np.eye(sl.stop - sl.start) if s is None else s)
    s = scipy.linalg.block_diag(*maps)
    out = s @ cov @ s.T
    return 0.5 * (out + out.T), [np.linalg.inv(m) for m in maps]


class _Blocks:
    """Constant pieces of the three LMIs for a fixed target and partition."""

    def __init__(self, cov, da, db, precondition=True):
        # the initial bisection bracket uses the caller's matrix
        self.lambda_max = float(np.linalg.eigvalsh(cov)[-1])
        if precondition:
            cov, (self.back_a, self.back_b) = _precondition(cov, da, db)
        else:
            self.back_a, self.back_b = np.eye(da), np.eye(db)
        self.cov = cov
        self.da, self.db = da, db
        n = da + db
        self.ea = _symmetric_basis(da)
        self.eb = _symmetric_basis(db)
        ka, kb = len(self.ea), len(self.eb)
        self.ka, self.kb = ka, kb
        # gamma - gamma_A (+) gamma_B
        g0 = np.zeros((ka + kb, n, n))
        g0[:ka, :da, :da] = -self.ea
        g0[ka:, da:, da:] = -self.eb
        self.g0 = g0
        # embeddings of gamma_A and gamma_B
        za = np.zeros((da, da))
        zb = np.zeros((db, db))
        self.emb_a = np.array([hermitian_embedding(e, za) for e in self.ea])
        self.emb_b = np.array([hermitian_embedding(e, zb) for e in self.eb])
        self.sig_a = hermitian_embedding(za, symplectic_form(da // 2))
        self.sig_b = hermitian_embedding(zb, symplectic_form(db // 2))

    def split(self, y):
        return _unvec(y[: self.ka], self.da), _unvec(y[self.ka : self.ka + self.kb], self.db)

    def witnesses(self, y):
        """gamma_A, gamma_B in the caller's coordinates (party A first)."""
        ga, gb = self.split(y)
        ga = self.back_a @ ga @ self.back_a.T
        gb = self.back_b @ gb @ self.back_b.T
        return 0.5 * (ga + ga.T), 0.5 * (gb + gb.T)

    def margin(self, gamma_a, gamma_b, x):
        """Exact minimum eigenvalue over the three constraint matrices."""
        diff = self.cov.copy()
        diff[: self.da, : self.da] -= gamma_a
        diff[self.da :, self.da :] -= gamma_b
        return min(
            np.linalg.eigvalsh(diff)[0],
            hermitian_min_eig(gamma_a, x * symplectic_form(self.da // 2)),
            hermitian_min_eig(gamma_b, x * symplectic_form(self.db // 2)),
        )

    def feasibility_lmi(self, x):
        """maximize t over (gamma_A, gamma_B, t) with every block shifted by -t I."""
        ka, kb, n = self.ka, self.kb, self.da + self.db
        m = ka + kb + 1
        f0 = [self.cov, x * self.sig_a, x * self.sig_b]
        fi0 = np.concatenate([self.g0, -np.eye(n)[None]])
        fi1 = np.zeros((m, 2 * self.da, 2 * self.da))
        fi1[:ka] = self.emb_a
        fi1[-1] = -np.eye(2 * self.da)
        fi2 = np.zeros((m, 2 * self.db, 2 * self.db))
        fi2[ka : ka + kb] = self.emb_b
        fi2[-1] = -np.eye(2 * self.db)
        c = np.zeros(m)
        c[-1] = 1.0
        return sdp.LMIProblem(c, f0, [fi0, fi1, fi2])

    def scale_lmi(self):
        """maximize x over (gamma_A, gamma_B, x) directly."""
        ka, kb, n = self.ka, self.kb, self.da + self.db
        m = ka + kb + 1
        f0 = [self.cov, np.zeros((2 * self.da,) * 2), np.zeros((2 * self.db,) * 2)]
        fi0 = np.concatenate([self.g0, np.zeros((1, n, n))])
        fi1 = np.zeros((m, 2 * self.da, 2 * self.da))
        fi1[:ka] = self.emb_a
        fi1[-1] = self.sig_a
        fi2 = np.zeros((m, 2 * self.db, 2 * self.db))
        fi2[ka : ka + kb] = self.emb_b
        fi2[-1] = self.sig_b
        c = np.zeros(m)
        c[-1] = 1.0
        return sdp.LMIProblem(c, f0, [fi0, fi1, fi2])


@dataclass(frozen=True)
class SdpFeasibilityProblem:
    """Does gamma dominate gamma_A (+) gamma_B with both locally x-physical?"""

    target: GaussianState
    partition: ModePartition
    x: float


@dataclass
class FeasibilityResult:
    verdict: str
    margin: float  # best exact min-eigenvalue margin found
    upper_bound: float  # certified bound on the maximal margin (inf if none)
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    iterations: int


def _check_feasible(blocks, x, feas_tol, max_iter):
    best = {"margin": -np.inf, "y": None}
    verdict = None

    def monitor(y, upper):
        nonlocal verdict
        ga, gb = blocks.split(y)
        marg = blocks.margin(ga, gb, x)
        if marg > best["margin"]:
            best["margin"], best["y"] = marg, y.copy()
        if marg >= -feas_tol:
            verdict = FEASIBLE
        elif upper < -feas_tol:
            verdict = INFEASIBLE
        return verdict is not None

    sol = sdp.solve_lmi(blocks.feasibility_lmi(x), tol=1e-10, max_iter=max_iter, monitor=monitor)
    if verdict is None:
        ga, gb = blocks.split(sol.y)
        marg = blocks.margin(ga, gb, x)
        if marg > best["margin"]:
            best["margin"], best["y"] = marg, sol.y.copy()
        if best["margin"] >= -feas_tol:
            verdict = FEASIBLE
        elif sol.upper < -feas_tol or sol.status == sdp.OPTIMAL:
            verdict = INFEASIBLE
        else:
            verdict = INDETERMINATE
    ga, gb = blocks.witnesses(best["y"])
    return FeasibilityResult(
        verdict=verdict,
        margin=float(best["margin"]),
        upper_bound=float(sol.upper),
        gamma_a=ga,
        gamma_b=gb,
        iterations=sol.iterations,
    )


def separability_feasible(problem, feas_tol=DEFAULT_FEAS_TOL, max_iter=DEFAULT_MAX_ITER):
    """Decide the separability LMI system at scale ``problem.x``.

    The system is recast as maximizing the smallest eigenvalue t over all three
    constraint matrices: FEASIBLE iff max t >= -feas_tol. A FEASIBLE verdict
    carries witnesses whose margin has been recomputed exactly from
    eigenvalues; INFEASIBLE carries a dual upper bound below -feas_tol. When
    the solver stalls the verdict is INDETERMINATE with the best margin seen.
    """
    if problem.x < 0:
        raise InvalidArgument("scale x must be non-negative")
    blocks = _Blocks(*_canonical(problem.target, problem.partition))
    return _check_feasible(blocks, float(problem.x), feas_tol, max_iter)


@dataclass
class EntanglementResult:
    value: float  # E = 1 - x*
    x_lower: float
    x_upper: float
    gamma_a: np.ndarray  # witnesses at x_lower, party A modes first
    gamma_b: np.ndarray
    solves: int
    iterations: int

    @property
    def bracket_width(self):
        return self.x_upper - self.x_lower


def _concavity_bracket(blocks, x, res, lo, hi):
    """x-interval for x* implied by a certified margin interval at x.

    The optimal margin t*(x) is concave with t*(x*) = 0 and
    t*(0) >= lambda_min(gamma) / 2 (take gamma_A (+) gamma_B = lambda_min / 2 I).
    Concavity then gives x* - x <= t*(x) x* / t*(0) below x* and
    x - x* <= -t*(x) x* / t*(0) above it, with x* <= hi.
    """
    t0 = 0.5 * float(np.linalg.eigvalsh(blocks.cov)[0])
    if not t0 > 0 or not np.isfinite(res.upper_bound):
        return lo, hi
    scale = hi / t0
    return (
        max(lo, x - max(res.upper_bound, 0.0) * scale),
        min(hi, x + max(-res.margin, 0.0) * scale),
    )


def _bisect(blocks, tol, feas_tol, max_iter):
    """Bisection on the feasibility verdict.

    A point whose verdict stays undecided lies within solver resolution of
    the boundary; its certified margin interval still bounds x* through
    concavity. If that bound is within ``tol`` the bisection ends there,
    otherwise the ambiguous interval is raised as Indeterminate.
    """
    lo, hi = 0.0, blocks.lambda_max
    solves = iterations = 0
    witness = (np.zeros((blocks.da,) * 2), np.zeros((blocks.db,) * 2))

    def check(x):
        nonlocal solves, iterations
        res = _check_feasible(blocks, x, feas_tol, max_iter)
        solves += 1
        iterations += res.iterations
        return res

    def undecided(x, res):
        raise Indeterminate(
            f"feasibility at x={x:.9g} undecided (margin {res.margin:.3g}, "
            f"bound {res.upper_bound:.3g})",
            interval=(lo, hi),
            margin=res.margin,
        )

    top = check(hi)
    if top.verdict == INDETERMINATE:
        undecided(hi, top)
    if top.verdict == FEASIBLE:
        lo = hi
        witness = (top.gamma_a, top.gamma_b)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = check(mid)
        if res.verdict == FEASIBLE:
            lo = mid
            witness = (res.gamma_a, res.gamma_b)
        elif res.verdict == INFEASIBLE:
            hi = mid
        else:
            new_lo, new_hi = _concavity_bracket(blocks, mid, res, lo, hi)
            if new_hi - new_lo > tol:
                lo, hi = new_lo, new_hi
                undecided(mid, res)
            lo, hi = new_lo, new_hi
    return EntanglementResult(
        value=1.0 - 0.5 * (lo + hi),
        x_lower=lo,
        x_upper=hi,
        gamma_a=witness[0],
        gamma_b=witness[1],
        solves=solves,
        iterations=iterations,
    )


def _direct(blocks, tol, max_iter):
    sol = sdp.solve_lmi(blocks.scale_lmi(), tol=min(1e-9, 0.01 * tol), max_iter=max_iter)
    if not sol.upper - sol.lower <= tol:
        raise Indeterminate(
            f"scale maximization ended ({sol.status}) with bracket [{sol.lower:.9g}, {sol.upper:.9g}]",
            interval=(sol.lower, sol.upper),
        )
    ga, gb = blocks.witnesses(sol.y)
    return EntanglementResult(
        value=1.0 - 0.5 * (sol.lower + sol.upper),
        x_lower=sol.lower,
        x_upper=sol.upper,
        gamma_a=ga,
        gamma_b=gb,
        solves=1,
        iterations=sol.iterations,
    )


def entanglement(
    state,
    partition,
    tol=DEFAULT_TOL,
    method="bisection",
    feas_tol=DEFAULT_FEAS_TOL,
    max_iter=DEFAULT_MAX_ITER,
    check_physical=True,
):
    """Compute E together with its bracket and separability witnesses.

    ``method="bisection"`` bisects x over [0, lambda_max(gamma)] with one
    feasibility solve per step until the bracket is at most ``tol`` wide.
    ``method="direct"`` maximizes x in a single interior point run; its
    bracket is the final duality gap.
    """
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    if check_physical:
        phys = physicality_margin(state)
        if phys < -PHYSICAL_TOL:
            raise InvalidState(f"state is unphysical (margin {phys:.3g})")
    blocks = _Blocks(*_canonical(state, partition))
    if method == "bisection":
        return _bisect(blocks, tol, feas_tol, max_iter)
    if method == "direct":
        return _direct(blocks, tol, max_iter)
    raise InvalidArgument(f"unknown method {method!r}")


def entanglement_measure(state, partition, tol=DEFAULT_TOL, **kwargs):
    """E(gamma) = 1 - max x; positive values certify entanglement."""
    return entanglement(state, partition, tol=tol, **kwargs).value


@dataclass
class CertificationReport:
    entanglement: float
    ppt_margin: float
    physicality: float
    e_bracket_width: float
    tol: float
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    iterations: dict = field(default_factory=dict)

    @property
    def classification(self):
        return classify(self.entanglement, self.ppt_margin, self.physicality, self.tol)

    def to_dict(self):
        return {
            "entanglement": self.entanglement,
            "ppt_margin": self.ppt_margin,
            "physicality": self.physicality,
            "classification": self.classification,
            "e_bracket_width": self.e_bracket_width,
            "iterations": dict(self.iterations),
            "feasibility_witnesses": {
                "gamma_a": self.gamma_a.tolist(),
                "gamma_b": self.gamma_b.tolist(),
            },
        }


def classify(e, p, phys, tol=DEFAULT_TOL):
    """Name the region of state space; values within tol of zero are undecided.

    A state on the boundary in every measure (the vacuum) is reported as
    separable-boundary.
    """
    if phys < -PHYSICAL_TOL:
        return UNPHYSICAL
    if e > tol:
        if p > PHYSICAL_TOL:
            return BOUND_ENTANGLED
        if p < -PHYSICAL_TOL:
            return FREE_ENTANGLED
        return UNDECIDED
    if e < -tol:
        return SEPARABLE
    # |E| <= tol: on the separable boundary as far as E can tell
    if p < -PHYSICAL_TOL:
        return UNDECIDED
    return SEPARABLE_BOUNDARY


def certify(state, partition, tol=DEFAULT_TOL, method="bisection", allow_unphysical=False, **kwargs):
    """Evaluate E, P and the physicality margin of one state.

    Unphysical input raises InvalidState unless ``allow_unphysical`` is set;
    the bootstrap sets it so that every resample contributes its physicality.
    """
    state = as_state(state)
    phys = physicality_margin(state)
    if phys < -PHYSICAL_TOL and not allow_unphysical:
        raise InvalidState(f"state is unphysical (margin {phys:.3g})")
    ppt = ppt_measure(state, partition)
    res = entanglement(state, partition, tol=tol, method=method, check_physical=False, **kwargs)
    return CertificationReport(
        entanglement=res.value,
        ppt_margin=ppt,
        physicality=phys,
        e_bracket_width=res.bracket_width,
        tol=tol,
        gamma_a=res.gamma_a,
        gamma_b=res.gamma_b,
        iterations={"solves": res.solves, "interior_point": res.iterations},
    )
