"""Covariance matrices of Gaussian states and the symplectic algebra around them.

Conventions used throughout the package:

* quadratures are ordered ``(x1, p1, ..., xn, pn)``;
* covariance matrices are vacuum normalized, so the vacuum is the identity
  (hbar = 1 with the factor 2 in the second-moment definition);
* modes are numbered from 1, matching the JSON file formats.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidState

ORDERING = "x1,p1,...,xn,pn"

_ASYMMETRY_WARN = 1e-8
_PD_THRESHOLD = 1e-12


def symplectic_form(n_modes):
    """Return the 2n x 2n symplectic form, a direct sum of [[0, 1], [-1, 0]]."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgument(f"n_modes must be a positive integer, got {n_modes!r}")
    return np.kron(np.eye(int(n_modes)), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def hermitian_embedding(real_part, imag_part):
    """Real symmetric matrix [[S, -A], [A, S]] with the spectrum of S + iA doubled."""
    return np.block([[real_part, -imag_part], [imag_part, real_part]])


def hermitian_min_eig(real_part, imag_part, tol=1e-10):
    """Minimum eigenvalue of the Hermitian matrix ``real_part + 1j * imag_part``.

    Only a real symmetric eigensolver is used: the 2N x 2N embedding
    [[S, -A], [A, S]] has exactly the spectrum of S + iA, each eigenvalue
    appearing twice.

    Parameters
    ----------
    real_part : array_like, shape (N, N)
        Symmetric part S.
    imag_part : array_like, shape (N, N)
        Antisymmetric part A.
    tol : float
        Allowed deviation from (anti)symmetry, relative to the matrix scale.
    """
    s = np.asarray(real_part, dtype=float)
    a = np.asarray(imag_part, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape != a.shape:
        raise InvalidArgument(f"shape mismatch: {s.shape} vs {a.shape}")
    scale = max(1.0, np.abs(s).max(initial=0.0), np.abs(a).max(initial=0.0))
    if np.abs(s - s.T).max(initial=0.0) > tol * scale:
        raise InvalidArgument("real part is not symmetric")
    if np.abs(a + a.T).max(initial=0.0) > tol * scale:
        raise InvalidArgument("imaginary part is not antisymmetric")
    return float(np.linalg.eigvalsh(hermitian_embedding(s, a))[0])


@dataclass(frozen=True)
class ModePartition:
    """Bipartition of the modes into parties A and B (1-based mode indices)."""

    party_a: tuple
    party_b: tuple

    def __post_init__(self):
        a = tuple(sorted(int(m) for m in self.party_a))
        b = tuple(sorted(int(m) for m in self.party_b))
        if not a or not b:
            raise InvalidArgument("both parties need at least one mode")
        if len(set(a)) != len(a) or len(set(b)) != len(b) or set(a) & set(b):
            raise InvalidArgument(f"parties overlap or repeat modes: {a} | {b}")
        if min(a + b) < 1:
            raise InvalidArgument("mode indices start at 1")
        object.__setattr__(self, "party_a", a)
        object.__setattr__(self, "party_b", b)

    @property
    def n_modes(self):
        return len(self.party_a) + len(self.party_b)

    def check(self, n_modes):
        """Raise InvalidArgument unless the parties cover exactly modes 1..n_modes."""
        if set(self.party_a) | set(self.party_b) != set(range(1, n_modes + 1)):
            raise InvalidArgument(
                f"partition {self} does not cover modes 1..{n_modes}"
            )
        return self

    @classmethod
    def parse(cls, text):
        """Build a partition from ``"1,2|3,4"``."""
        try:
            left, right = text.split("|")
            return cls(
                tuple(int(m) for m in left.split(",") if m.strip()),
                tuple(int(m) for m in right.split(",") if m.strip()),
            )
        except ValueError as exc:
            raise InvalidArgument(f"cannot parse partition {text!r}: {exc}") from None

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["a"]), tuple(data["b"]))

    def to_dict(self):
        return {"a": list(self.party_a), "b": list(self.party_b)}

    def __str__(self):
        return ",".join(map(str, self.party_a)) + "|" + ",".join(map(str, self.party_b))


@dataclass(frozen=True, eq=False)
class GaussianState:
    """A Gaussian state given by its covariance matrix and optional mean.

    The covariance matrix is symmetrized on construction; asymmetry above
    1e-8 (relative) triggers a warning since it usually means a bookkeeping
    error rather than sampling noise. Physicality is not enforced here, so
    unphysical estimates can still be represented and diagnosed.
    """

    cov: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise InvalidArgument(f"covariance must be 2n x 2n, got shape {cov.shape}")
        if cov.shape[0] == 0:
            raise InvalidArgument("covariance must cover at least one mode")
        if not np.all(np.isfinite(cov)):
            raise InvalidArgument("covariance has non-finite entries")
        asym = np.abs(cov - cov.T).max()
        if asym > _ASYMMETRY_WARN * max(1.0, np.abs(cov).max()):
            warnings.warn(f"covariance asymmetric by {asym:.3g}; symmetrizing", stacklevel=3)
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        if self.mean is None:
            mean = np.zeros(cov.shape[0])
        else:
            mean = np.array(self.mean, dtype=float).reshape(-1)
            if mean.shape != (cov.shape[0],):
                raise InvalidArgument(f"mean must have length {cov.shape[0]}")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)

    @property
    def n_modes(self):
        return self.cov.shape[0] // 2

    @classmethod
    def vacuum(cls, n_modes):
        return cls(np.eye(2 * n_modes))

    def with_cov(self, cov):
        return GaussianState(cov, self.mean)

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return np.array_equal(self.cov, other.cov) and np.array_equal(self.mean, other.mean)

    __hash__ = None


def as_state(obj):
    """Accept a GaussianState or a bare covariance array."""
    return obj if isinstance(obj, GaussianState) else GaussianState(obj)


def physicality_margin(state):
    """Minimum eigenvalue of gamma + i sigma; non-negative iff the state is physical."""
    cov = as_state(state).cov
    return hermitian_min_eig(cov, symplectic_form(cov.shape[0] // 2))


def symplectic_eigenvalues(state):
    """Symplectic eigenvalues of gamma in ascending order.

    These are the moduli of the eigenvalues of i sigma gamma. With
    K = gamma^(1/2) sigma gamma^(1/2) antisymmetric, K^T K has the squared
    symplectic eigenvalues, each twice.
    """
    cov = as_state(state).cov
    w, v = np.linalg.eigh(cov)
    if w[0] <= _PD_THRESHOLD:
        raise InvalidState(f"covariance not positive definite (min eigenvalue {w[0]:.3g})")
    root = (v * np.sqrt(w)) @ v.T
    k = root @ symplectic_form(cov.shape[0] // 2) @ root
    nu2 = np.linalg.eigvalsh(k.T @ k)
    return np.sqrt(np.clip(nu2[::2], 0.0, None))


def momentum_flip(partition, n_modes):
    """Diagonal of M: -1 on the momentum coordinates of party B, +1 elsewhere."""
    partition.check(n_modes)
    diag = np.ones(2 * n_modes)
    for m in partition.party_b:
        diag[2 * (m - 1) + 1] = -1.0
    return diag


def partial_transpose(state, partition):
    """Partially transposed state M gamma M (and M d for the mean)."""
    state = as_state(state)
    d = momentum_flip(partition, state.n_modes)
    return GaussianState(state.cov * np.outer(d, d), state.mean * d)


def mode_permutation_indices(permutation, n_modes):
    """Quadrature index array for a mode ordering given as 1-based mode numbers."""
    perm = [int(m) for m in permutation]
    if sorted(perm) != list(range(1, n_modes + 1)):
        raise InvalidArgument(f"{perm} is not a permutation of modes 1..{n_modes}")
    return np.array([2 * (m - 1) + k for m in perm for k in (0, 1)])


def permute_modes(state, permutation):
    """Reorder modes so that new mode j is old mode ``permutation[j - 1]``."""
    state = as_state(state)
    idx = mode_permutation_indices(permutation, state.n_modes)
    return GaussianState(state.cov[np.ix_(idx, idx)], state.mean[idx])


def inverse_permutation(permutation):
    inv = [0] * len(permutation)
    for new, old in enumerate(permutation, start=1):
        inv[old - 1] = new
    return inv
