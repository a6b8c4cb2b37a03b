"""Optical circuits of squeezed sources, phase-gates and losses.

A circuit acts on a product of single-mode Gaussian sources. Gates are
applied strictly in order and losses last; passive gates are symplectic and
orthogonal, so they preserve the symplectic spectrum of the input.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument, InvalidState, UnphysicalSource
from .gaussian import GaussianState, as_state, physicality_margin

VACUUM = "vacuum"
SQUEEZED_THERMAL = "squeezed_thermal"

# variances (v_min, v_max) of the three OPAs and the gate phases of the paper's setup
OPA_VARIANCES = ((2.0, 3.46), (0.54, 5.16), (0.63, 2.54))
GATE_PHASES_DEG = (90.0, 41.0, 140.0)


def rotation(angle_deg):
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SourceSpec:
    """Single-mode source with quadrature variances v_min <= v_max (vacuum = 1).

    ``orientation_deg`` is the angle of the minor (squeezed) axis measured
    from the x quadrature.
    """

    kind: str = VACUUM
    v_min: float = 1.0
    v_max: float = 1.0
    orientation_deg: float = 0.0

    def __post_init__(self):
        if self.kind not in (VACUUM, SQUEEZED_THERMAL):
            raise InvalidArgument(f"unknown source kind {self.kind!r}")
        if self.kind == VACUUM:
            object.__setattr__(self, "v_min", 1.0)
            object.__setattr__(self, "v_max", 1.0)
        if not 0.0 <= self.v_min <= self.v_max:
            raise InvalidArgument(f"need 0 <= v_min <= v_max, got ({self.v_min}, {self.v_max})")

    @property
    def is_pure(self):
        return abs(self.v_min * self.v_max - 1.0) <= 1e-9

    @property
    def is_hot(self):
        """Hot squeezing: unequal variances, neither below the vacuum level."""
        return self.v_min >= 1.0 and self.v_min != self.v_max


def source_covariance(spec):
    """2x2 covariance R diag(v_min, v_max) R^T of a source."""
    if spec.v_min * spec.v_max < 1.0 - 1e-9:
        raise UnphysicalSource(
            f"source variances ({spec.v_min}, {spec.v_max}) violate v_min * v_max >= 1"
        )
    r = rotation(spec.orientation_deg)
    return r @ np.diag([spec.v_min, spec.v_max]) @ r.T


@dataclass(frozen=True)
class Rotation:
    mode: int
    angle_deg: float


@dataclass(frozen=True)
class PhaseGate:
    """Beam splitter with power transmissivity T after a phase shift on the second mode."""

    modes: tuple
    transmissivity: float
    phase_deg: float = 0.0

    def __post_init__(self):
        i, j = (int(m) for m in self.modes)
        if i == j:
            raise InvalidArgument(f"phase-gate needs two distinct modes, got {self.modes}")
        if not 0.0 <= self.transmissivity <= 1.0:
            raise InvalidArgument(f"transmissivity {self.transmissivity} outside [0, 1]")
        object.__setattr__(self, "modes", (i, j))
        object.__setattr__(self, "phase_deg", float(self.phase_deg) % 360.0)


@dataclass(frozen=True)
class LossSpec:
    mode: int
    efficiency: float

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise InvalidArgument(f"efficiency {self.efficiency} outside (0, 1]")


@dataclass(frozen=True)
class CircuitSpec:
    sources: tuple
    gates: tuple = ()
    losses: tuple = ()
    partition: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "losses", tuple(self.losses))
        n = len(self.sources)
        if n == 0:
            raise InvalidArgument("a circuit needs at least one source")
        for g in self.gates:
            modes = (g.mode,) if isinstance(g, Rotation) else g.modes
            if any(not 1 <= m <= n for m in modes):
                raise InvalidArgument(f"gate {g} references a mode outside 1..{n}")
        for loss in self.losses:
            if not 1 <= loss.mode <= n:
                raise InvalidArgument(f"loss on mode {loss.mode} outside 1..{n}")

    @property
    def n_modes(self):
        return len(self.sources)


def _block(mode):
    return slice(2 * (mode - 1), 2 * mode)


def _conjugate(cov, mat, modes):
    """S gamma S^T for S acting as ``mat`` on the listed modes and identity elsewhere."""
    idx = np.concatenate([np.arange(2 * (m - 1), 2 * m) for m in modes])
    out = cov.copy()
    out[idx, :] = mat @ cov[idx, :]
    out[:, idx] = out[:, idx] @ mat.T
    return out


def apply_phase_rotation(state, mode, angle_deg):
    state = as_state(state)
    return state.with_cov(_conjugate(state.cov, rotation(angle_deg), [mode]))


def beamsplitter_matrix(transmissivity, phase_deg):
    """4x4 symplectic matrix: phase on the second mode, then real mixing."""
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    eye = np.eye(2)
    mix = np.block([[t * eye, r * eye], [-r * eye, t * eye]])
    phase = np.eye(4)
    phase[2:, 2:] = rotation(phase_deg)
    return mix @ phase


def apply_phase_gate(state, gate):
    state = as_state(state)
    mat = beamsplitter_matrix(gate.transmissivity, gate.phase_deg)
    return state.with_cov(_conjugate(state.cov, mat, list(gate.modes)))


def apply_loss(state, loss):
    """Pure-loss channel of efficiency eta on one mode: gamma -> X gamma X + (1 - eta) I."""
    state = as_state(state)
    if not 0.0 < loss.efficiency <= 1.0:
        raise InvalidArgument(f"efficiency {loss.efficiency} outside (0, 1]")
    eta = float(loss.efficiency)
    if eta == 1.0:
        return state
    blk = _block(loss.mode)
    cov = state.cov.copy()
    # cross-correlations pick up sqrt(eta); the mode's own block gets eta
    # directly so that e.g. 0.9 * 0.5 + 0.1 comes out as the double 0.55
    cov[blk, :] *= np.sqrt(eta)
    cov[:, blk] *= np.sqrt(eta)
    cov[blk, blk] = eta * state.cov[blk, blk] + (1.0 - eta) * np.eye(2)
    return state.with_cov(cov)


def apply_gate(state, gate):
    if isinstance(gate, Rotation):
        return apply_phase_rotation(state, gate.mode, gate.angle_deg)
    return apply_phase_gate(state, gate)


def source_state(spec):
    """Direct sum of the source covariances."""
    n = spec.n_modes
    cov = np.zeros((2 * n, 2 * n))
    for k, src in enumerate(spec.sources, start=1):
        try:
            cov[_block(k), _block(k)] = source_covariance(src)
        except UnphysicalSource as exc:
            raise UnphysicalSource(f"source {k}: {exc}", index=k) from None
    return GaussianState(cov)


def simulate_circuit(spec):
    state = source_state(spec)
    for gate in spec.gates:
        state = apply_gate(state, gate)
    for loss in spec.losses:
        state = apply_loss(state, loss)
    margin = physicality_margin(state)
    if margin < -1e-9:
        # passive and lossy maps cannot do this; it means a malformed element
        raise InvalidState(f"circuit output unphysical (margin {margin:.3g})")
    return state


def paper_circuit(splitting_ratios=(0.5, 0.5, 0.5, 0.5), partition=None, efficiency=None,
                  gate_order=("PG1", "PG2", "PG3", "BS4")):
    """Three OPAs and a vacuum mode mixed on four beam splitters.

    Mode 1 carries the hot-squeezed OPA1 output (2.0, 3.46), modes 2 and 3 the
    squeezed OPA2 (0.54, 5.16) and OPA3 (0.63, 2.54) outputs, mode 4 vacuum.
    PG1 (phase 90 deg) mixes modes 1 and 2, PG2 (41 deg) modes 3 and 4, PG3
    (140 deg) modes 2 and 3, and a fourth beam splitter without phase mixes
    modes 1 and 4. ``splitting_ratios`` are the power transmissivities of
    PG1, PG2, PG3 and the fourth splitter. ``gate_order`` chooses the order in
    which the four elements act; ``efficiency`` adds equal loss on every mode.
    """
    ratios = tuple(float(r) for r in splitting_ratios)
    if len(ratios) != 4 or not all(0.0 <= r <= 1.0 for r in ratios):
        raise InvalidArgument(f"need four splitting ratios in [0, 1], got {splitting_ratios}")
    sources = [SourceSpec(SQUEEZED_THERMAL, *v) for v in OPA_VARIANCES] + [SourceSpec()]
    named = {
        "PG1": PhaseGate((1, 2), ratios[0], GATE_PHASES_DEG[0]),
        "PG2": PhaseGate((3, 4), ratios[1], GATE_PHASES_DEG[1]),
        "PG3": PhaseGate((2, 3), ratios[2], GATE_PHASES_DEG[2]),
        "BS4": PhaseGate((1, 4), ratios[3], 0.0),
    }
    if sorted(gate_order) != sorted(named):
        raise InvalidArgument(f"gate_order must be a permutation of {sorted(named)}")
    losses = ()
    if efficiency is not None:
        losses = tuple(LossSpec(m, efficiency) for m in range(1, 5))
    return CircuitSpec(sources, tuple(named[g] for g in gate_order), losses, partition)


def with_ratios(spec, ratios):
    """Copy of ``spec`` whose phase-gates carry the given transmissivities, in gate order."""
    ratios = iter(ratios)
    gates = tuple(
        replace(g, transmissivity=next(ratios)) if isinstance(g, PhaseGate) else g
        for g in spec.gates
    )
    return replace(spec, gates=gates)
