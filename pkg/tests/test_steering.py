import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steercert import steering as sg
from steercert.measurements import SIGMA_X, SIGMA_Z, canonical_observables, observable_from_angle, theta_max
from steercert.qlinalg import I4
from steercert.states import CANONICAL_FAMILIES, Family, StateFamily, build_state, densify, werner_mix


def brute_fgsi(psi, a0, a1):
    """Conditional probabilities from explicit eigenvector amplitudes."""
    def vec(obs, k):
        w, v = np.linalg.eigh(obs.matrix)
        return v[:, 1] if k == 0 else v[:, 0]

    total = 0.0
    for a_obs, b_obs in ((a0, SIGMA_Z), (a1, SIGMA_X)):
        joint = abs(np.vdot(np.kron(vec(a_obs, 0), vec(b_obs, 0)), psi)) ** 2
        marg = sum(abs(np.vdot(np.kron(vec(a_obs, 0), vec(b_obs, k)), psi)) ** 2 for k in (0, 1))
        total += joint / marg
    return total


@pytest.mark.parametrize("fam", CANONICAL_FAMILIES)
@pytest.mark.parametrize("a", [0.2, 0.4, 1 / math.sqrt(2), 0.8, 0.95])
def test_maximal_violation(fam, a):
    stats = sg.family_statistics(StateFamily(fam, a))
    assert sg.fgsi_value(stats) == pytest.approx(2.0, abs=1e-10)


def test_curve_matches_bruteforce():
    sf = StateFamily("PhiPlus", 0.6)
    psi = build_state(sf)
    a0 = canonical_observables(sf)[0]
    for th in np.linspace(-1.2, 1.2, 13):
        a1 = observable_from_angle(th)
        s = sg.fgsi_value(sg.exact_statistics(densify(psi), (a0, a1), (SIGMA_Z, SIGMA_X), ((0, 0), (1, 1))))
        assert s == pytest.approx(brute_fgsi(psi, a0, a1), abs=1e-10)


def test_statistics_validation_and_json():
    stats = sg.family_statistics(StateFamily("PsiMinus", 0.3))
    back = sg.SteeringStatistics.from_json(stats.to_json())
    for k in stats.populated:
        assert np.allclose(back.table(*k), stats.table(*k))
    doc = json.loads(stats.to_json())
    assert doc["schema_version"] == 1
    assert set(doc["pairs"]) == {"0,0", "0,1", "1,0", "1,1"}
    with pytest.raises(ValueError):
        sg.SteeringStatistics({(0, 0): [[0.5, 0.5], [0.5, 0.5]]})
    with pytest.raises(ValueError):
        sg.SteeringStatistics({(0, 0): [[1.5, -0.5], [0, 0]]})
    with pytest.raises(KeyError):
        stats.table(2, 0)


def test_conditional_within_pair():
    t = np.array([[0.3, 0.1], [0.2, 0.4]])
    stats = sg.SteeringStatistics({(0, 0): t})
    assert stats.conditional(0, 0, 0, 0) == pytest.approx(0.75)
    assert stats.alice_marginal(0, 1) == pytest.approx(0.6)
    with pytest.raises(ZeroDivisionError):
        sg.SteeringStatistics({(0, 0): [[0, 0], [0.5, 0.5]]}).conditional(0, 0, 0, 0)


def test_lhs_bound():
    assert sg.lhs_bound_bruteforce(10_000) == pytest.approx(sg.S_LHS, abs=1e-3)
    e_plus = np.array([math.sin(math.pi / 4), 0, math.cos(math.pi / 4)])
    assert sg.lhs_value(e_plus) == pytest.approx(sg.S_LHS, abs=1e-12)


def test_lhs_states_never_violate(rng):
    # product states reach at most the LHS bound for any Alice observables
    for _ in range(50):
        va, vb = rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = np.kron(va / np.linalg.norm(va), vb / np.linalg.norm(vb))
        th0, th1 = rng.uniform(-math.pi, math.pi, 2)
        s = brute_fgsi(psi, observable_from_angle(th0), observable_from_angle(th1))
        assert s <= sg.S_LHS + 1e-9


def test_fgsi_scan_finds_theta_max():
    a = 0.8
    res = sg.fgsi_scan(densify(build_state(StateFamily("PhiPlus", a))), StateFamily("PhiPlus", a))
    assert res.theta_best == pytest.approx(theta_max(a), abs=1e-6)
    assert res.s_best == pytest.approx(2.0, abs=1e-9)
    assert len(res.curve) == 721


def test_linearized_fgsi_at_pure_state():
    for a in (0.3, 0.6, 0.9):
        stats = sg.family_statistics(StateFamily("PhiPlus", a))
        assert sg.linearized_fgsi(stats, a) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("fam", CANONICAL_FAMILIES)
def test_families_share_statistics(fam):
    # the four canonical families are related by a unitary on Alice's side,
    # so their statistics coincide once a is mapped to sqrt(1 - a^2) for psi
    a = 0.35
    ref = sg.family_statistics(StateFamily("PhiPlus", a))
    other = sg.family_statistics(StateFamily(fam, math.sqrt(1 - a * a) if fam.is_psi else a))
    for k in ref.populated:
        assert np.allclose(ref.table(*k), other.table(*k), atol=1e-12)


@pytest.mark.parametrize("fam", CANONICAL_FAMILIES)
@pytest.mark.parametrize("a", np.linspace(0.1, 0.9, 9))
def test_certify_roundtrip_with_family(fam, a):
    rep = sg.certify(sg.family_statistics(StateFamily(fam, a)), fam)
    assert rep.family_id is fam
    assert rep.a_est == pytest.approx(a, abs=1e-8)
    assert rep.two_e_minus_1 == pytest.approx(rep.concurrence_est**2, abs=1e-9)
    assert rep.concurrence_est == pytest.approx(2 * a * math.sqrt(1 - a * a), abs=1e-8)
    assert sg.self_test_fidelity(rep, densify(build_state(StateFamily(fam, a)))) == pytest.approx(1.0, abs=1e-7)


def test_certify_without_family_lists_equivalents():
    rep = sg.certify(sg.family_statistics(StateFamily("PsiPlus", 0.6)))
    assert rep.family_id is Family.PHI_PLUS
    assert rep.a_est == pytest.approx(0.8)
    forms = dict(rep.equivalent_forms)
    assert forms[Family.PSI_PLUS] == pytest.approx(0.6)
    assert not rep.family_given


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.98), st.sampled_from(CANONICAL_FAMILIES))
def test_certify_property(a, fam):
    rep = sg.certify(sg.family_statistics(StateFamily(fam, a)), fam)
    assert rep.a_est == pytest.approx(a, abs=1e-7)
    assert rep.s_fgsi == pytest.approx(2.0, abs=1e-9)


def test_not_steerable():
    mixed = sg.exact_statistics(I4 / 4, (SIGMA_Z, SIGMA_X), (SIGMA_Z, SIGMA_X))
    with pytest.raises(sg.NotSteerable):
        sg.certify(mixed)
    bell = build_state(StateFamily("PhiPlus", 1 / math.sqrt(2)))
    weak = sg.exact_statistics(werner_mix(bell, 0.6), (SIGMA_Z, SIGMA_X), (SIGMA_Z, SIGMA_X))
    with pytest.raises(sg.NotSteerable):
        sg.certify(weak)


def test_inconsistent_statistics():
    # S exceeds the LHS bound while both mutual predictabilities are below 1/2
    t = np.array([[0.4, 0.0], [0.6, 0.0]])
    stats = sg.SteeringStatistics({(0, 0): t, (1, 1): t})
    with pytest.raises(sg.InconsistentStatistics):
        sg.certify(stats)


def test_report_serializes():
    rep = sg.certify(sg.family_statistics(StateFamily("PhiMinus", 0.4)), "PhiMinus")
    doc = json.loads(json.dumps(rep.to_dict()))
    assert doc["family_id"] == "PhiMinus"
    assert doc["pairs_consumed"]["S_fgsi"] == ["0,0", "1,1"]


def test_noisy_certification_is_close():
    a = 0.8
    sf = StateFamily("PhiPlus", a)
    a0, a1, b0, b1 = canonical_observables(sf)
    rho = werner_mix(build_state(sf), 0.97)
    rep = sg.certify(sg.exact_statistics(rho, (a0, a1), (b0, b1)), "PhiPlus")
    assert abs(rep.a_est - a) < 0.01
    assert sg.self_test_fidelity(rep, rho) > 0.97
