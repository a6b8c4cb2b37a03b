"""Random-walk search for robust bound entangled states.

Two spaces are searched with the same acceptance rule: a move is taken only
if the new state is physical, more entangled (E' > E) and more clearly PPT
(P' > P). The normal-form space is the 16-parameter bipartite normal form of
four-mode covariance matrices; the circuit space varies chosen parameters of
an optical circuit, so every candidate is physical by construction.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import circuit as circ
from .certifier import DEFAULT_TOL, PHYSICAL_TOL, entanglement, ppt_measure
from .errors import Indeterminate, InvalidArgument, SearchExhausted
from .gaussian import GaussianState, ModePartition, physicality_margin

log = logging.getLogger(__name__)

N_PARAMS = 16
NORMAL_FORM_PARTITION = ModePartition((1, 2), (3, 4))
VACUUM_CENTER = (1.0, 1.0, 1.0, 1.0) + (0.0,) * 12

# (row, col) of lambda_5 .. lambda_16 in the upper triangle, 0-based
_OFF_DIAGONAL = (
    (0, 4), (1, 5), (2, 6), (3, 7),  # lambda_5 .. lambda_8
    (0, 6), (0, 7), (1, 6), (1, 7),  # lambda_9 .. lambda_12
    (2, 4), (2, 5), (3, 4), (3, 5),  # lambda_13 .. lambda_16
)


def normal_form_matrix(params):
    """Assemble the 8x8 bipartite normal form from lambda_1 .. lambda_16.

    Diagonal blocks are lambda_1 I, ..., lambda_4 I; lambda_5 .. lambda_8
    correlate mode 1 with 3 (x and p) and mode 2 with 4; lambda_9 .. lambda_12
    fill the mode 1 / mode 4 block and lambda_13 .. lambda_16 the mode 2 /
    mode 3 block.
    """
    lam = np.asarray(params, dtype=float)
    if lam.shape != (N_PARAMS,):
        raise InvalidArgument(f"normal form needs {N_PARAMS} parameters, got shape {lam.shape}")
    cov = np.diag(np.repeat(lam[:4], 2))
    for value, (i, j) in zip(lam[4:], _OFF_DIAGONAL):
        cov[i, j] = cov[j, i] = value
    return cov


def sample_hypercube(rng):
    """Uniform draw from [-1/2, 1/2]^16."""
    return rng.uniform(-0.5, 0.5, N_PARAMS)


@dataclass(frozen=True)
class WalkConfig:
    step: float = 0.01
    rotation_angle: float = 0.01  # radians
    max_steps: int = 1000
    seed: int = 0
    objective_floor: float = np.inf  # stop once min(E, P) reaches this
    tol: float = DEFAULT_TOL
    method: str = "direct"
    draw_budget: int = 1_000_000
    cube_center: tuple = (1.25,) * 4 + (0.0,) * 12
    first_improvement: bool = True
    max_evaluations: int = None  # cap on entanglement evaluations
    restarts: int = 0  # fresh hypercube seeds tried after a local optimum below the floor

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidArgument("step must be positive")
        if self.max_steps < 0:
            raise InvalidArgument("max_steps must be non-negative")
        if self.restarts < 0:
            raise InvalidArgument("restarts must be non-negative")
        if len(self.cube_center) != N_PARAMS:
            raise InvalidArgument(f"cube_center needs {N_PARAMS} entries")


@dataclass
class SearchResult:
    best_params: object
    best_cov: np.ndarray
    best_e: float
    best_p: float
    trajectory: list
    rng_seed: int
    steps_taken: int
    evaluations: int
    draws: int = 0
    stop_reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def objective(self):
        return min(self.best_e, self.best_p)

    def to_dict(self):
        params = self.best_params
        if isinstance(params, np.ndarray):
            params = params.tolist()
        return {
            "best_params": params,
            "best_e": self.best_e,
            "best_p": self.best_p,
            "objective": self.objective,
            "rng_seed": self.rng_seed,
            "steps_taken": self.steps_taken,
            "evaluations": self.evaluations,
            "draws": self.draws,
            "stop_reason": self.stop_reason,
            "trajectory": self.trajectory,
            **self.extra,
        }


def walk_moves(params, config):
    """All 272 neighbours: +-step along each axis, then +-angle in each of the 120 planes."""
    lam = np.asarray(params, dtype=float)
    out = []
    for k in range(N_PARAMS):
        for sign in (1.0, -1.0):
            cand = lam.copy()
            cand[k] += sign * config.step
            out.append(cand)
    for i, j in itertools.combinations(range(N_PARAMS), 2):
        for sign in (1.0, -1.0):
            t = sign * config.rotation_angle
            c, s = np.cos(t), np.sin(t)
            cand = lam.copy()
            cand[i] = c * lam[i] - s * lam[j]
            cand[j] = s * lam[i] + c * lam[j]
            out.append(cand)
    return out


def move_labels():
    labels = [f"axis {k + 1} {'+' if s > 0 else '-'}" for k in range(N_PARAMS) for s in (1, -1)]
    labels += [
        f"rotate ({i + 1},{j + 1}) {'+' if s > 0 else '-'}"
        for i, j in itertools.combinations(range(N_PARAMS), 2)
        for s in (1, -1)
    ]
    return labels


class _Evaluator:
    """Certifies candidate states and counts entanglement evaluations."""

    def __init__(self, partition, config):
        self.partition = partition
        self.config = config
        self.evaluations = 0

    def measures(self, cov, current=None):
        """(E, P) of a physical candidate, or None if it cannot beat ``current``."""
        if physicality_margin(cov) < -PHYSICAL_TOL:
            return None
        p = ppt_measure(cov, self.partition)
        if current is not None and not p > current[1]:
            return None
        self.evaluations += 1
        try:
            e = entanglement(
                cov, self.partition, tol=self.config.tol, method=self.config.method,
                check_physical=False,
            ).value
        except Indeterminate:
            log.warning("entanglement undecided for a candidate; skipping it")
            return None
        return e, p

    @property
    def exhausted(self):
        cap = self.config.max_evaluations
        return cap is not None and self.evaluations >= cap


def _accepts(new, e, p, approach):
    if approach and not min(e, p) > 0:
        return min(new) > min(e, p)
    return new[0] > e and new[1] > p


def _hill_climb(start, start_measures, neighbours, build, evaluator, config, rng, labels,
                approach=False):
    """First-improvement walk with the strict two-objective acceptance rule.

    With ``approach`` set, a start that is not yet bound entangled first
    climbs min(E, P) alone; the strict rule takes over once both are positive.
    """
    params, (e, p) = start, start_measures

    def phase():
        return "approach" if approach and not min(e, p) > 0 else "walk"

    trajectory = [{"step": 0, "move": "seed", "e": e, "p": p, "phase": phase()}]
    steps = 0
    reason = "max_steps"
    try:
        while steps < config.max_steps:
            if min(e, p) >= config.objective_floor:
                reason = "objective_floor"
                break
            if evaluator.exhausted:
                reason = "evaluation_cap"
                break
            cands = neighbours(params)
            order = rng.permutation(len(cands)) if config.first_improvement else range(len(cands))
            best = None
            for k in order:
                cov = build(cands[k])
                if cov is None:
                    continue
                res = evaluator.measures(cov, current=(e, p) if phase() == "walk" else None)
                if res is None or not _accepts(res, e, p, approach):
                    continue
                if config.first_improvement:
                    best = (k, res)
                    break
                if best is None or min(res) > min(best[1]):
                    best = (k, res)
            if best is None:
                reason = "local_optimum"
                break
            k, (e, p) = best
            params = cands[k]
            steps += 1
            trajectory.append({"step": steps, "move": labels(k), "e": e, "p": p, "phase": phase()})
            log.info("step %d: E=%.5f P=%.5f (%s)", steps, e, p, labels(k))
    except KeyboardInterrupt:
        reason = "interrupted"
    else:
        if steps >= config.max_steps and reason == "max_steps" and min(e, p) >= config.objective_floor:
            reason = "objective_floor"
    return params, e, p, steps, trajectory, reason


def find_seed(config, rng, evaluator):
    """Draw from the hypercube around ``config.cube_center`` until a bound entangled state turns up."""
    center = np.asarray(config.cube_center, dtype=float)
    for draw in range(1, config.draw_budget + 1):
        lam = center + sample_hypercube(rng)
        cov = normal_form_matrix(lam)
        res = evaluator.measures(cov, current=(-np.inf, 0.0))
        if res is not None and res[0] > 0:
            return lam, res, draw
    raise SearchExhausted(
        f"no bound entangled state in {config.draw_budget} hypercube draws", config.draw_budget
    )


def random_walk_normal_form(config):
    """Seed from the hypercube, then hill-climb; optionally restart from new seeds.

    A restart happens only when a walk ends in a local optimum below
    ``config.objective_floor``; the best walk by min(E, P) is returned and
    its trajectory entries carry the restart index.
    """
    rng = np.random.default_rng(config.seed)
    evaluator = _Evaluator(NORMAL_FORM_PARTITION, config)
    labels = move_labels()
    best = None
    draws = 0
    for attempt in range(config.restarts + 1):
        try:
            lam, measures, n = find_seed(replace(config, draw_budget=config.draw_budget - draws), rng, evaluator)
        except SearchExhausted:
            if best is None:
                raise SearchExhausted(
                    f"no bound entangled state in {config.draw_budget} hypercube draws",
                    config.draw_budget,
                ) from None
            break
        draws += n
        walk = _hill_climb(
            lam, measures,
            neighbours=lambda x: walk_moves(x, config),
            build=normal_form_matrix,
            evaluator=evaluator,
            config=config,
            rng=rng,
            labels=labels.__getitem__,
        )
        for entry in walk[4]:
            entry["restart"] = attempt
        if best is None or min(walk[1], walk[2]) > min(best[1], best[2]):
            best = walk
        if walk[5] != "local_optimum" or min(walk[1], walk[2]) >= config.objective_floor:
            break

    params, e, p, steps, trajectory, reason = best
    return SearchResult(
        best_params=params,
        best_cov=normal_form_matrix(params),
        best_e=e,
        best_p=p,
        trajectory=trajectory,
        rng_seed=config.seed,
        steps_taken=steps,
        evaluations=evaluator.evaluations,
        draws=draws,
        stop_reason=reason,
        extra={"space": "normal-form", "partition": NORMAL_FORM_PARTITION.to_dict(),
               "restarts_used": attempt},
    )


# circuit space --------------------------------------------------------------

MASK_GROUPS = ("ratios", "variances", "orientations", "phases")
CIRCUIT_STEPS = {"ratios": 0.01, "variances": 0.01, "orientations": 1.0, "phases": 1.0}


def circuit_parameters(spec, mask):
    """Names, values and step sizes of the parameters selected by ``mask``.

    ``mask`` holds group names from MASK_GROUPS and/or individual names such
    as ``gate2.transmissivity`` or ``source1.v_min`` (1-based).
    """
    names, values, steps = [], [], []

    def want(group, name):
        return group in mask or name in mask

    for k, src in enumerate(spec.sources, start=1):
        if src.kind == circ.VACUUM:
            continue
        for attr in ("v_min", "v_max"):
            if want("variances", f"source{k}.{attr}"):
                names.append(f"source{k}.{attr}")
                values.append(getattr(src, attr))
                steps.append(CIRCUIT_STEPS["variances"])
        if want("orientations", f"source{k}.orientation_deg"):
            names.append(f"source{k}.orientation_deg")
            values.append(src.orientation_deg)
            steps.append(CIRCUIT_STEPS["orientations"])
    for k, gate in enumerate(spec.gates, start=1):
        if isinstance(gate, circ.PhaseGate):
            if want("ratios", f"gate{k}.transmissivity"):
                names.append(f"gate{k}.transmissivity")
                values.append(gate.transmissivity)
                steps.append(CIRCUIT_STEPS["ratios"])
            if want("phases", f"gate{k}.phase_deg"):
                names.append(f"gate{k}.phase_deg")
                values.append(gate.phase_deg)
                steps.append(CIRCUIT_STEPS["phases"])
        elif want("phases", f"gate{k}.angle_deg"):
            names.append(f"gate{k}.angle_deg")
            values.append(gate.angle_deg)
            steps.append(CIRCUIT_STEPS["phases"])
    known = set(MASK_GROUPS) | set(names)
    unknown = set(mask) - known
    if unknown:
        raise InvalidArgument(f"unknown circuit parameters in mask: {sorted(unknown)}")
    return names, np.array(values, dtype=float), np.array(steps, dtype=float)


def set_circuit_parameters(spec, names, values):
    """Copy of ``spec`` with the named parameters replaced; None if the result is invalid."""
    sources = list(spec.sources)
    gates = list(spec.gates)
    try:
        for name, value in zip(names, values):
            obj, attr = name.split(".")
            if obj.startswith("source"):
                k = int(obj[len("source"):]) - 1
                sources[k] = replace(sources[k], **{attr: float(value)})
            else:
                k = int(obj[len("gate"):]) - 1
                gates[k] = replace(gates[k], **{attr: float(value)})
        for src in sources:
            circ.source_covariance(src)
    except (InvalidArgument, ValueError):
        return None
    return replace(spec, sources=tuple(sources), gates=tuple(gates))


def random_walk_circuit(base, free_params, config, partition=None):
    """Walk over the masked parameters of ``base`` with the two-objective rule.

    Candidates are +-step moves of single parameters and of every pair of
    parameters (0.01 for ratios and variances, 1 degree for angles, all scaled
    by ``config.step / 0.01``). A base circuit that is not bound entangled is
    first walked uphill in min(E, P) alone. With an empty mask only the base
    circuit is evaluated.
    """
    partition = partition or base.partition
    if partition is None:
        raise InvalidArgument("random_walk_circuit needs a partition")
    rng = np.random.default_rng(config.seed)
    evaluator = _Evaluator(partition, config)
    names, values, steps = circuit_parameters(base, set(free_params))
    steps = steps * (config.step / 0.01)

    base_state = circ.simulate_circuit(base)
    start = evaluator.measures(base_state.cov)
    if start is None:
        raise Indeterminate("could not certify the base circuit")

    # single-parameter moves, then joint moves of every pair so the walk can
    # follow ridges of min(E, P) that no single axis improves
    moves = []
    for k in range(len(values)):
        for sign in (1.0, -1.0):
            delta = np.zeros(len(values))
            delta[k] = sign * steps[k]
            moves.append((delta, f"{names[k]} {'+' if sign > 0 else '-'}"))
    for i, j in itertools.combinations(range(len(values)), 2):
        for si, sj in itertools.product((1.0, -1.0), repeat=2):
            delta = np.zeros(len(values))
            delta[i], delta[j] = si * steps[i], sj * steps[j]
            moves.append((
                delta,
                f"{names[i]} {'+' if si > 0 else '-'}, {names[j]} {'+' if sj > 0 else '-'}",
            ))

    def neighbours(x):
        return [x + delta for delta, _ in moves]

    def build(x):
        spec = set_circuit_parameters(base, names, x)
        return None if spec is None else circ.simulate_circuit(spec).cov

    def label(k):
        return moves[k][1]

    if names:
        params, e, p, n_steps, trajectory, reason = _hill_climb(
            values, start, neighbours, build, evaluator, config, rng, label, approach=True
        )
    else:
        params, (e, p), n_steps, reason = values, start, 0, "empty_mask"
        trajectory = [{"step": 0, "move": "seed", "e": e, "p": p}]
    best_spec = set_circuit_parameters(base, names, params)
    return SearchResult(
        best_params=dict(zip(names, map(float, params))),
        best_cov=circ.simulate_circuit(best_spec).cov,
        best_e=e,
        best_p=p,
        trajectory=trajectory,
        rng_seed=config.seed,
        steps_taken=n_steps,
        evaluations=evaluator.evaluations,
        stop_reason=reason,
        extra={"space": "circuit", "partition": partition.to_dict(), "circuit": best_spec},
    )


def feasibility_filter(spec, squeezing_floor=0.5):
    """Keep circuits with achievable squeezing and at most one hot-squeezed source.

    Returns ``(passed, reasons)``.
    """
    reasons = []
    if any(src.v_min < squeezing_floor for src in spec.sources):
        reasons.append("unachievable squeezing")
    if sum(src.is_hot for src in spec.sources) > 1:
        reasons.append("multiple hot-squeezed modes")
    return not reasons, reasons
