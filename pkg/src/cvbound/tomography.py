"""Synthetic homodyne tomography, bootstrap certification and Gaussianity tests.

A measurement setting fixes one homodyne angle per mode; every sample is a
joint outcome of all detectors, q_i = x_i cos(theta_i) + p_i sin(theta_i),
in vacuum units. The covariance matrix is recovered by least squares from
the per-setting sample second moments, which are linear in its entries.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .certifier import DEFAULT_TOL, certify, ppt_measure
from .errors import Indeterminate, InvalidArgument, InvalidState, UnidentifiableModel
from .gaussian import GaussianState, as_state, physicality_margin

log = logging.getLogger(__name__)

SHOT_NOISE_LABEL = "shot-noise"
MIN_GAUSSIANITY_SAMPLES = 100

# seven angle patterns (degrees) plus shot noise; A-optimal among {0, 45, 90, 135}^4
PLAN_4_MODES = (
    (0.0, 0.0, 90.0, 135.0),
    (0.0, 90.0, 0.0, 90.0),
    (45.0, 135.0, 0.0, 0.0),
    (90.0, 45.0, 0.0, 135.0),
    (90.0, 90.0, 90.0, 0.0),
    (90.0, 135.0, 135.0, 90.0),
    (135.0, 0.0, 45.0, 45.0),
)


@dataclass(frozen=True)
class MeasurementSetting:
    """Homodyne angles in degrees, one per mode.

    A shot-noise setting records the detectors with the signal blocked, i.e.
    vacuum input; it calibrates the noise unit and is not used by the fit.
    """

    angles: tuple
    label: str = ""
    shot_noise: bool = False

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        if not angles or not all(math.isfinite(a) for a in angles):
            raise InvalidArgument(f"setting angles must be finite, got {self.angles}")
        object.__setattr__(self, "angles", angles)
        if not self.label:
            label = SHOT_NOISE_LABEL if self.shot_noise else "/".join(f"{a:g}" for a in angles)
            object.__setattr__(self, "label", label)

    @property
    def n_modes(self):
        return len(self.angles)

    def projection(self):
        """n x 2n matrix mapping (x1, p1, ...) to the measured quadratures."""
        n = self.n_modes
        out = np.zeros((n, 2 * n))
        t = np.deg2rad(self.angles)
        out[np.arange(n), 2 * np.arange(n)] = np.cos(t)
        out[np.arange(n), 2 * np.arange(n) + 1] = np.sin(t)
        return out

    def to_dict(self):
        return {"angles": list(self.angles), "label": self.label, "shot_noise": self.shot_noise}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["angles"]), d.get("label", ""), bool(d.get("shot_noise", False)))


@dataclass
class QuadratureDataset:
    settings: list
    samples: list  # one (count, n) array per setting

    def __post_init__(self):
        if len(self.settings) != len(self.samples):
            raise InvalidArgument("one sample block is needed per setting")
        if not self.settings:
            raise InvalidArgument("a dataset needs at least one setting")
        n = self.settings[0].n_modes
        blocks = []
        for s, block in zip(self.settings, self.samples):
            block = np.asarray(block, dtype=float)
            if block.ndim != 2 or block.shape[1] != n or s.n_modes != n:
                raise InvalidArgument(
                    f"setting {s.label!r}: expected samples of shape (count, {n}), got {block.shape}"
                )
            blocks.append(block)
        self.samples = blocks

    @property
    def n_modes(self):
        return self.settings[0].n_modes

    @property
    def counts(self):
        return [b.shape[0] for b in self.samples]

    @property
    def balanced(self):
        return len(set(self.counts)) == 1


def default_setting_plan(n_modes):
    """Full-rank setting plan ending with one shot-noise setting.

    Four modes use the fixed seven-pattern plan (eight settings with shot
    noise). Other sizes grow a plan greedily from angle patterns over
    {0, 45, 90, 135} degrees until every covariance entry is identified; one
    mode gives the x, diagonal and p readouts.
    """
    if n_modes < 1:
        raise InvalidArgument("n_modes must be at least 1")
    if n_modes == 4:
        patterns = list(PLAN_4_MODES)
    elif n_modes == 1:
        patterns = [(0.0,), (45.0,), (90.0,)]
    else:
        patterns = _greedy_plan(n_modes)
    plan = [MeasurementSetting(p) for p in patterns]
    plan.append(MeasurementSetting((0.0,) * n_modes, shot_noise=True))
    return plan


def _greedy_plan(n):
    unknowns = n * (2 * n + 1)
    cands = list(itertools.product((0.0, 45.0, 90.0, 135.0), repeat=n))
    rows = {c: _setting_rows(MeasurementSetting(c)) for c in cands}
    chosen, design = [], np.zeros((0, unknowns))
    rank = 0
    while rank < unknowns:
        best = max(cands, key=lambda c: np.linalg.matrix_rank(np.vstack([design, rows[c]])))
        design = np.vstack([design, rows[best]])
        chosen.append(best)
        rank = np.linalg.matrix_rank(design)
    return chosen


def entry_names(n_modes):
    """Names of the upper-triangular covariance entries, e.g. 'x1p2'."""
    labels = [f"{q}{k}" for k in range(1, n_modes + 1) for q in ("x", "p")]
    rows, cols = np.triu_indices(2 * n_modes)
    return [labels[a] + labels[b] for a, b in zip(rows, cols)]


def _setting_rows(setting):
    """Rows of the design matrix: second moments <q_i q_j> (i <= j) in terms of gamma entries."""
    proj = setting.projection()
    n = setting.n_modes
    rows, cols = np.triu_indices(2 * n)
    i, j = np.triu_indices(n)
    coef = proj[i][:, rows] * proj[j][:, cols] + proj[i][:, cols] * proj[j][:, rows]
    coef[:, rows == cols] *= 0.5
    return coef


def design_matrix(settings):
    """Stacked design matrix of the non-shot-noise settings."""
    active = [s for s in settings if not s.shot_noise]
    if not active:
        raise UnidentifiableModel("no signal settings", entry_names(settings[0].n_modes))
    return np.vstack([_setting_rows(s) for s in active])


def check_identifiable(settings):
    """Raise UnidentifiableModel naming the entries the settings leave free."""
    design = design_matrix(settings)
    n = settings[0].n_modes
    _, sv, vt = np.linalg.svd(design)
    tol = max(design.shape) * np.finfo(float).eps * (sv[0] if sv.size else 1.0) * 1e3
    rank = int(np.sum(sv > tol))
    if rank < design.shape[1]:
        null = vt[rank:]
        free = np.abs(null).max(axis=0) > 1e-8
        names = [name for name, f in zip(entry_names(n), free) if f]
        raise UnidentifiableModel(f"settings leave {len(names)} covariance entries unconstrained: "
                                  + ", ".join(names), names)
    return design


def sample_state(state, setting, count, rng):
    """Joint homodyne outcomes of ``count`` shots, shape (count, n)."""
    state = as_state(state)
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    if setting.n_modes != state.n_modes:
        raise InvalidArgument(f"setting has {setting.n_modes} angles for a {state.n_modes}-mode state")
    if setting.shot_noise:
        cov = np.eye(state.n_modes)
        mean = np.zeros(state.n_modes)
    else:
        margin = physicality_margin(state)
        if margin < -1e-9:
            raise InvalidState(f"cannot sample an unphysical state (margin {margin:.3g})")
        proj = setting.projection()
        cov = proj @ state.cov @ proj.T
        mean = proj @ state.mean
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((count, state.n_modes)) @ chol.T + mean


def simulate_dataset(state, settings, count, rng):
    """Sample every setting; ``count`` is per setting."""
    return QuadratureDataset(list(settings), [sample_state(state, s, count, rng) for s in settings])


@dataclass
class CovarianceEstimate:
    state: GaussianState
    std_errors: np.ndarray  # 2n x 2n, standard errors of the entries
    shot_noise_variances: np.ndarray = None  # per channel, from the shot-noise setting if present

    @property
    def cov(self):
        return self.state.cov


class _MomentModel:
    """Per-setting feature blocks and the linear map from moments to gamma.

    Features of one sample are the products q_i q_j (i <= j) followed by the
    q_i, so any weighting of the samples gives weighted raw moments with one
    matrix product; the bootstrap relies on this. Blocks are stored as
    (features, samples) so that product runs over contiguous rows.
    """

    def __init__(self, data):
        self.data = data
        n = data.n_modes
        self.n = n
        self.active = [k for k, s in enumerate(data.settings) if not s.shot_noise]
        design = check_identifiable(data.settings)
        self.pinv = np.linalg.pinv(design)
        self.mean_design = np.vstack([data.settings[k].projection() for k in self.active])
        self.mean_pinv = np.linalg.pinv(self.mean_design)
        self.iu = np.triu_indices(n)
        self.features = [self._features(data.samples[k]) for k in self.active]

    def _features(self, q):
        i, j = self.iu
        return np.ascontiguousarray(np.hstack([q[:, i] * q[:, j], q]).T)

    def moments(self, k_feat, weights=None, idx=None):
        """Centered second moments and means of one setting's feature block."""
        feat = self.features[k_feat]
        if idx is not None:
            raw = feat[:, idx].mean(axis=1)
        elif weights is not None:
            raw = feat @ weights / weights.sum()
        else:
            raw = feat.mean(axis=1)
        n_pairs = len(self.iu[0])
        mu = raw[n_pairs:]
        second = raw[:n_pairs] - mu[self.iu[0]] * mu[self.iu[1]]
        return second, mu

    def solve(self, seconds, means):
        theta = self.pinv @ np.concatenate(seconds)
        dim = 2 * self.n
        cov = np.zeros((dim, dim))
        rows, cols = np.triu_indices(dim)
        cov[rows, cols] = theta
        cov[cols, rows] = theta
        mean = self.mean_pinv @ np.concatenate(means)
        return cov, mean

    def estimate(self):
        seconds, means = zip(*(self.moments(k) for k in range(len(self.active))))
        return self.solve(seconds, means)

    def std_errors(self):
        """Propagate per-setting moment covariances through the least-squares map."""
        n_pairs = len(self.iu[0])
        blocks = []
        for feat in self.features:
            count = feat.shape[1]
            blocks.append(np.cov(feat[:n_pairs]).reshape(n_pairs, n_pairs) / count)
        sigma = np.zeros((sum(b.shape[0] for b in blocks),) * 2)
        o = 0
        for b in blocks:
            sigma[o:o + b.shape[0], o:o + b.shape[0]] = b
            o += b.shape[0]
        var = np.einsum("ij,jk,ik->i", self.pinv, sigma, self.pinv)
        dim = 2 * self.n
        se = np.zeros((dim, dim))
        rows, cols = np.triu_indices(dim)
        se[rows, cols] = np.sqrt(np.maximum(var, 0.0))
        se[cols, rows] = se[rows, cols]
        return se


def estimate_covariance(data):
    """Least-squares covariance matrix with standard errors."""
    model = _MomentModel(data)
    cov, mean = model.estimate()
    shot = None
    for s, block in zip(data.settings, data.samples):
        if s.shot_noise:
            shot = block.var(axis=0)
    return CovarianceEstimate(GaussianState(cov, mean), model.std_errors(), shot)


def _significance(mean, std):
    return float(mean / std) if std > 0 else None


@dataclass
class BootstrapReport:
    resample_count: int
    e_samples: np.ndarray
    p_samples: np.ndarray
    physicality_samples: np.ndarray
    full_e: float
    full_p: float
    full_physicality: float
    with_replacement: bool = True
    indeterminate: int = 0  # resamples whose E could not be certified (stored as nan)

    def _stats(self, x):
        x = x[np.isfinite(x)]
        if x.size == 0:
            return float("nan"), float("nan")
        return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0

    @property
    def e_mean(self):
        return self._stats(self.e_samples)[0]

    @property
    def e_std(self):
        return self._stats(self.e_samples)[1]

    @property
    def p_mean(self):
        return self._stats(self.p_samples)[0]

    @property
    def p_std(self):
        return self._stats(self.p_samples)[1]

    @property
    def physicality_mean(self):
        return self._stats(self.physicality_samples)[0]

    @property
    def physicality_std(self):
        return self._stats(self.physicality_samples)[1]

    @property
    def significance_e(self):
        """E mean over its standard deviation; None when the spread is zero."""
        return _significance(self.e_mean, self.e_std)

    @property
    def significance_p(self):
        return _significance(self.p_mean, self.p_std)

    @property
    def significance_phys(self):
        return _significance(self.physicality_mean, self.physicality_std)

    def to_dict(self, include_samples=False):
        out = {
            "resample_count": self.resample_count,
            "with_replacement": self.with_replacement,
            "full_data": {
                "entanglement": self.full_e,
                "ppt_margin": self.full_p,
                "physicality": self.full_physicality,
            },
            "e_mean": self.e_mean,
            "e_std": self.e_std,
            "p_mean": self.p_mean,
            "p_std": self.p_std,
            "physicality_mean": self.physicality_mean,
            "physicality_std": self.physicality_std,
            "significance_e": self.significance_e,
            "significance_p": self.significance_p,
            "significance_phys": self.significance_phys,
            "indeterminate": self.indeterminate,
        }
        if include_samples:
            out["e_samples"] = self.e_samples.tolist()
            out["p_samples"] = self.p_samples.tolist()
            out["physicality_samples"] = self.physicality_samples.tolist()
        return out


def resample_rng(seed, ordinal):
    """Generator of resample ``ordinal``; independent of execution order."""
    return np.random.default_rng([int(seed), int(ordinal)])


def _certify_values(cov, partition, tol):
    """(E, P, physicality) of an estimate; E is nan if it cannot be certified."""
    try:
        rep = certify(cov, partition, tol=tol, method="direct", allow_unphysical=True)
    except Indeterminate:
        return float("nan"), ppt_measure(cov, partition), physicality_margin(cov)
    return rep.entanglement, rep.ppt_margin, rep.physicality


def bootstrap_certify(data, partition, resamples, seed=0, tol=DEFAULT_TOL, replace=True,
                      subsample_fraction=0.5, threads=1):
    """Bootstrap E, P and the physicality margin of the estimated covariance.

    Each resample redraws every setting's samples uniformly (with replacement
    and the original size by default; without replacement, a
    ``subsample_fraction`` share of distinct samples), re-estimates gamma and
    certifies it, unphysical or not. Resample k draws from
    ``resample_rng(seed, k)``, so results do not depend on ``threads``.
    """
    if resamples < 1:
        raise InvalidArgument("resamples must be at least 1")
    if not replace and not 0.0 < subsample_fraction <= 1.0:
        raise InvalidArgument("subsample_fraction must lie in (0, 1]")
    model = _MomentModel(data)
    full_cov, _ = model.estimate()
    full = _certify_values(full_cov, partition, tol)

    def one(ordinal):
        rng = resample_rng(seed, ordinal)
        seconds, means = [], []
        for k, feat in enumerate(model.features):
            count = feat.shape[1]
            if replace:
                weights = np.bincount(rng.integers(0, count, count), minlength=count).astype(float)
                second, mu = model.moments(k, weights=weights)
            else:
                size = max(1, int(round(subsample_fraction * count)))
                second, mu = model.moments(k, idx=rng.choice(count, size, replace=False))
            seconds.append(second)
            means.append(mu)
        cov, _ = model.solve(seconds, means)
        return _certify_values(cov, partition, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, range(resamples)))
    else:
        values = [one(k) for k in range(resamples)]
    arr = np.array(values, dtype=float).reshape(resamples, 3)
    return BootstrapReport(
        resample_count=resamples,
        e_samples=arr[:, 0],
        p_samples=arr[:, 1],
        physicality_samples=arr[:, 2],
        full_e=full[0],
        full_p=full[1],
        full_physicality=full[2],
        with_replacement=replace,
        indeterminate=int(np.isnan(arr[:, 0]).sum()),
    )


# Gaussianity -----------------------------------------------------------------

@dataclass
class ChannelGaussianity:
    label: str
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    qq_points: np.ndarray  # (grid, 2): theoretical normal quantile, standardized sample quantile
    chi2_statistic: float = None
    chi2_dof: int = None
    chi2_p_value: float = None
    degenerate: bool = False

    def to_dict(self):
        return {
            "label": self.label,
            "moments": {
                "mean": self.mean,
                "variance": self.variance,
                "skewness": self.skewness,
                "excess_kurtosis": self.excess_kurtosis,
            },
            "chi2_statistic": self.chi2_statistic,
            "chi2_dof": self.chi2_dof,
            "chi2_p_value": self.chi2_p_value,
            "degenerate": self.degenerate,
        }


@dataclass
class GaussianityReport:
    channels: list = field(default_factory=list)
    quantile_grid_size: int = 0

    def to_dict(self):
        return {
            "quantile_grid_size": self.quantile_grid_size,
            "channels": [c.to_dict() for c in self.channels],
        }


def chi2_bin_count(count):
    return min(200, math.ceil(2.0 * count ** 0.4))


def channel_gaussianity(x, quantile_grid_size=99, label=""):
    """Moments, Q-Q points and binned chi-square normality test of one channel."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < MIN_GAUSSIANITY_SAMPLES:
        raise InvalidArgument(
            f"need at least {MIN_GAUSSIANITY_SAMPLES} samples per channel, got {x.size}"
        )
    if quantile_grid_size < 1:
        raise InvalidArgument("quantile_grid_size must be positive")
    mean = float(x.mean())
    std = float(x.std())
    probs = (np.arange(1, quantile_grid_size + 1) - 0.5) / quantile_grid_size
    theo = stats.norm.ppf(probs)
    if std <= 1e-12 * max(1.0, abs(mean)):
        qq = np.column_stack([theo, np.zeros_like(theo)])
        return ChannelGaussianity(label, mean, 0.0, float("nan"), float("nan"), qq, degenerate=True)
    z = (x - mean) / std
    qq = np.column_stack([theo, np.quantile(z, probs)])
    skew = float(np.mean(z ** 3))
    kurt = float(np.mean(z ** 4) - 3.0)

    # equiprobable bins under the fitted normal; mean and variance were estimated
    bins = chi2_bin_count(x.size)
    edges = stats.norm.ppf(np.linspace(0.0, 1.0, bins + 1)[1:-1])
    observed = np.bincount(np.searchsorted(edges, z), minlength=bins)
    expected = x.size / bins
    chi2 = float(np.sum((observed - expected) ** 2) / expected)
    dof = bins - 3
    return ChannelGaussianity(
        label, mean, std ** 2, skew, kurt, qq,
        chi2_statistic=chi2, chi2_dof=dof, chi2_p_value=float(stats.chi2.sf(chi2, dof)),
    )


def gaussianity_tests(data, quantile_grid_size=99):
    """Run channel_gaussianity on every (setting, mode) channel of the dataset."""
    report = GaussianityReport(quantile_grid_size=quantile_grid_size)
    for setting, block in zip(data.settings, data.samples):
        for mode in range(block.shape[1]):
            report.channels.append(channel_gaussianity(
                block[:, mode], quantile_grid_size, label=f"{setting.label}:mode{mode + 1}"
            ))
    return report
