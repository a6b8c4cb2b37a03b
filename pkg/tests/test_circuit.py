import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvbound.certifier import certify, entanglement_measure, ppt_measure
from cvbound.circuit import (
    GATE_PHASES_DEG,
    OPA_VARIANCES,
    CircuitSpec,
    LossSpec,
    PhaseGate,
    Rotation,
    SourceSpec,
    SQUEEZED_THERMAL,
    apply_loss,
    apply_phase_gate,
    apply_phase_rotation,
    paper_circuit,
    simulate_circuit,
    source_covariance,
    with_ratios,
)
from cvbound.errors import InvalidArgument, UnphysicalSource
from cvbound.gaussian import GaussianState, ModePartition, physicality_margin, symplectic_eigenvalues

from conftest import random_state


def _random_circuit(rng, n):
    sources = []
    for _ in range(n):
        v_min = rng.uniform(0.3, 2.0)
        v_max = max(v_min, 1.0 / v_min) * rng.uniform(1.0, 2.0)
        sources.append(SourceSpec(SQUEEZED_THERMAL, v_min, v_max, rng.uniform(0, 180)))
    gates = []
    for _ in range(int(rng.integers(1, 8))):
        if rng.random() < 0.3:
            gates.append(Rotation(int(rng.integers(1, n + 1)), rng.uniform(0, 360)))
        else:
            i, j = rng.choice(np.arange(1, n + 1), size=2, replace=False)
            gates.append(PhaseGate((int(i), int(j)), rng.uniform(), rng.uniform(0, 360)))
    return CircuitSpec(sources, gates)


# sources -----------------------------------------------------------------------

def test_vacuum_source():
    np.testing.assert_array_equal(source_covariance(SourceSpec()), np.eye(2))


def test_opa_sources():
    np.testing.assert_allclose(
        source_covariance(SourceSpec(SQUEEZED_THERMAL, 0.54, 5.16)), np.diag([0.54, 5.16])
    )
    hot = SourceSpec(SQUEEZED_THERMAL, 2.0, 3.46)
    np.testing.assert_allclose(source_covariance(hot), np.diag([2.0, 3.46]))
    assert hot.is_hot and not hot.is_pure


def test_orientation_rotates_minor_axis():
    cov = source_covariance(SourceSpec(SQUEEZED_THERMAL, 0.5, 2.0, 90.0))
    np.testing.assert_allclose(cov, np.diag([2.0, 0.5]), atol=1e-15)


def test_pure_flag():
    assert SourceSpec(SQUEEZED_THERMAL, 0.5, 2.0).is_pure
    assert not SourceSpec(SQUEEZED_THERMAL, 0.5, 2.0).is_hot


def test_unphysical_source():
    with pytest.raises(UnphysicalSource):
        source_covariance(SourceSpec(SQUEEZED_THERMAL, 0.5, 1.5))
    with pytest.raises(UnphysicalSource) as info:
        simulate_circuit(CircuitSpec([SourceSpec(), SourceSpec(SQUEEZED_THERMAL, 0.2, 1.0)]))
    assert info.value.index == 2


def test_source_validation():
    with pytest.raises(InvalidArgument):
        SourceSpec(SQUEEZED_THERMAL, 2.0, 1.0)
    with pytest.raises(InvalidArgument):
        SourceSpec("coherent")


# gates --------------------------------------------------------------------------

@pytest.mark.parametrize("angle", [0.0, 360.0])
def test_trivial_rotation(angle, rng):
    cov = random_state(rng, 2)
    np.testing.assert_allclose(apply_phase_rotation(cov, 2, angle).cov, cov, atol=1e-12)


def test_rotation_leaves_vacuum():
    np.testing.assert_allclose(apply_phase_rotation(np.eye(4), 1, 37.0).cov, np.eye(4), atol=1e-15)


def test_fully_transmissive_gate_only_rotates(rng):
    cov = random_state(rng, 2)
    out = apply_phase_gate(cov, PhaseGate((1, 2), 1.0, 63.0))
    np.testing.assert_allclose(out.cov, apply_phase_rotation(cov, 2, 63.0).cov, atol=1e-12)


def test_balanced_gate_on_vacua():
    out = apply_phase_gate(np.eye(4), PhaseGate((1, 2), 0.5, 0.0))
    np.testing.assert_allclose(out.cov, np.eye(4), atol=1e-15)


def test_balanced_gate_makes_two_mode_squeezing():
    # the 90 deg phase turns equally oriented squeezers into orthogonal ones
    # before mixing; orthogonal inputs need no phase. Both give e^(-2r) - 1.
    v = 0.5
    split = ModePartition((1,), (2,))
    for cov, phase in ((np.diag([v, 1 / v, v, 1 / v]), 90.0), (np.diag([v, 1 / v, 1 / v, v]), 0.0)):
        out = apply_phase_gate(cov, PhaseGate((1, 2), 0.5, phase))
        assert ppt_measure(out, split) == pytest.approx(v - 1.0, abs=1e-12)


def test_gate_validation():
    with pytest.raises(InvalidArgument):
        PhaseGate((2, 2), 0.5)
    with pytest.raises(InvalidArgument):
        PhaseGate((1, 2), 1.5)
    assert PhaseGate((1, 2), 0.5, 400.0).phase_deg == pytest.approx(40.0)
    assert PhaseGate((1, 2), 0.5, -90.0).phase_deg == pytest.approx(270.0)
    with pytest.raises(InvalidArgument):
        CircuitSpec([SourceSpec()], [PhaseGate((1, 2), 0.5)])


# loss ---------------------------------------------------------------------------

def test_loss_example_is_exact():
    out = apply_loss(np.diag([0.5, 2.0]), LossSpec(1, 0.9)).cov
    np.testing.assert_array_equal(out, np.diag([0.55, 1.9]))


def test_unit_efficiency_is_identity(rng):
    cov = GaussianState(random_state(rng, 3)).cov
    np.testing.assert_array_equal(apply_loss(cov, LossSpec(2, 1.0)).cov, cov)


def test_strong_loss_on_vacuum():
    np.testing.assert_allclose(apply_loss(np.eye(2), LossSpec(1, 1e-9)).cov, np.eye(2), atol=1e-15)


def test_loss_validation():
    for eta in (0.0, -0.5, 1.1):
        with pytest.raises(InvalidArgument):
            LossSpec(1, eta)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), e1=st.floats(0.05, 1.0), e2=st.floats(0.05, 1.0))
def test_loss_semigroup(seed, e1, e2):
    rng = np.random.default_rng(seed)
    cov = random_state(rng, 3)
    mode = int(rng.integers(1, 4))
    one = apply_loss(cov, LossSpec(mode, e1 * e2)).cov
    two = apply_loss(apply_loss(cov, LossSpec(mode, e2)), LossSpec(mode, e1)).cov
    np.testing.assert_allclose(one, two, atol=1e-12, rtol=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eta=st.floats(0.01, 1.0))
def test_loss_moves_trace_toward_vacuum(seed, eta):
    rng = np.random.default_rng(seed)
    cov = random_state(rng, 2)
    out = apply_loss(cov, LossSpec(1, eta)).cov
    before, after = np.trace(cov[:2, :2]), np.trace(out[:2, :2])
    if before >= 2.0:
        assert after <= before + 1e-12
    assert physicality_margin(out) >= -1e-9


# circuits -----------------------------------------------------------------------

def test_vacuum_circuit_stays_vacuum(rng):
    gates = [PhaseGate((1, 2), 0.3, 20.0), PhaseGate((2, 3), 0.7, 200.0), Rotation(3, 11.0)]
    out = simulate_circuit(CircuitSpec([SourceSpec()] * 3, gates))
    np.testing.assert_allclose(out.cov, np.eye(6), atol=1e-14)


def test_single_source_embedding():
    src = SourceSpec(SQUEEZED_THERMAL, 0.6, 2.0, 30.0)
    out = simulate_circuit(CircuitSpec([src]))
    np.testing.assert_array_equal(out.cov, source_covariance(src))


def test_gates_apply_in_order():
    src = [SourceSpec(SQUEEZED_THERMAL, 0.5, 2.0), SourceSpec()]
    g1, g2 = PhaseGate((1, 2), 0.3, 0.0), Rotation(2, 45.0)
    a = simulate_circuit(CircuitSpec(src, [g1, g2])).cov
    b = simulate_circuit(CircuitSpec(src, [g2, g1])).cov
    assert not np.allclose(a, b)


def test_passive_network_preserves_spectrum():
    rng = np.random.default_rng(5)
    for _ in range(100):
        spec = _random_circuit(rng, int(rng.integers(2, 5)))
        before = symplectic_eigenvalues(simulate_circuit(CircuitSpec(spec.sources)))
        after = symplectic_eigenvalues(simulate_circuit(spec))
        np.testing.assert_allclose(after, before, atol=1e-10, rtol=0)


def test_random_circuits_with_loss_are_physical():
    rng = np.random.default_rng(6)
    for _ in range(50):
        spec = _random_circuit(rng, 3)
        losses = [LossSpec(m, rng.uniform(0.1, 1.0)) for m in (1, 2, 3)]
        out = simulate_circuit(CircuitSpec(spec.sources, spec.gates, losses))
        assert physicality_margin(out) >= -1e-9


def test_paper_circuit_layout():
    spec = paper_circuit()
    assert [(s.v_min, s.v_max) for s in spec.sources[:3]] == list(OPA_VARIANCES)
    assert spec.sources[3].kind == "vacuum"
    assert [g.phase_deg for g in spec.gates[:3]] == list(GATE_PHASES_DEG)
    assert [g.transmissivity for g in spec.gates] == [0.5] * 4
    out = simulate_circuit(spec)
    assert out.cov.shape == (8, 8)
    assert physicality_margin(out) >= -1e-9


def test_paper_circuit_without_interference_is_product():
    spec = paper_circuit((1, 1, 1, 1))
    out = simulate_circuit(spec).cov
    for i in range(4):
        for j in range(4):
            if i != j:
                assert not out[2 * i:2 * i + 2, 2 * j:2 * j + 2].any()
    e = entanglement_measure(out, ModePartition((1, 2), (3, 4)), method="direct")
    assert e <= 1e-6


def test_paper_circuit_options():
    lossy = paper_circuit(efficiency=0.9)
    assert len(lossy.losses) == 4
    with pytest.raises(InvalidArgument):
        paper_circuit((0.5, 0.5, 0.5))
    with pytest.raises(InvalidArgument):
        paper_circuit(gate_order=("PG1", "PG1", "PG3", "BS4"))
    swapped = with_ratios(paper_circuit(), (0.1, 0.2, 0.3, 0.4))
    assert [g.transmissivity for g in swapped.gates] == [0.1, 0.2, 0.3, 0.4]


def test_shipped_preset_is_bound_entangled():
    from cvbound.io import load_preset

    spec = load_preset("bound-state")
    report = certify(simulate_circuit(spec), spec.partition, method="direct")
    assert report.classification == "bound-entangled"
    assert report.entanglement == pytest.approx(0.026213553726229133, abs=1e-4)
