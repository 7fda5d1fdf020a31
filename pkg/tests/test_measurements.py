import math

import numpy as np
import pytest

from steercert import measurements as ms
from steercert.qlinalg import SX, SZ, equal_up_to_phase
from steercert.states import CANONICAL_FAMILIES, Family, StateFamily, build_state, densify


def eigvec(obs, outcome):
    # eigenvector with eigenvalue +1 (outcome 0) or -1 (outcome 1)
    w, v = np.linalg.eigh(obs.matrix)
    return v[:, 1] if outcome == 0 else v[:, 0]


def brute_joint(psi, a_obs, alpha, b_obs, beta):
    return abs(np.vdot(np.kron(eigvec(a_obs, alpha), eigvec(b_obs, beta)), psi)) ** 2


def test_observable_validation():
    with pytest.raises(ValueError):
        ms.DichotomicObservable((1, 1, 0))
    neg = -ms.SIGMA_Z
    assert np.allclose(neg.matrix, -SZ)


def test_projectors():
    for obs in (ms.SIGMA_X, ms.SIGMA_Y, ms.observable_from_angle(0.3)):
        p0, p1 = ms.projector(obs, 0), ms.projector(obs, 1)
        assert np.allclose(p0 + p1, np.eye(2))
        assert np.allclose(p0 @ p0, p0)
        assert np.allclose(p0 - p1, obs.matrix)
    with pytest.raises(ValueError):
        ms.projector(ms.SIGMA_X, 2)


def test_theta_max():
    assert ms.theta_max(1 / math.sqrt(2)) == pytest.approx(math.pi / 4)
    a = 0.3
    t = ms.theta_max(a)
    assert math.cos(2 * t) == pytest.approx(1 - 2 * a * a)
    assert math.sin(2 * t) == pytest.approx(2 * a * math.sqrt(1 - a * a))


@pytest.mark.parametrize("fam", CANONICAL_FAMILIES)
def test_joint_probability_matches_amplitudes(fam):
    sf = StateFamily(fam, 0.37)
    psi = build_state(sf)
    rho = densify(psi)
    a0, a1, b0, b1 = ms.canonical_observables(sf)
    for a_obs in (a0, a1, ms.observable_from_angle(0.21)):
        for b_obs in (b0, b1):
            t = ms.joint_table(rho, a_obs, b_obs)
            assert t.sum() == pytest.approx(1.0)
            for x in (0, 1):
                for y in (0, 1):
                    assert t[x, y] == pytest.approx(brute_joint(psi, a_obs, x, b_obs, y), abs=1e-12)


def test_canonical_observables_perfect_correlation():
    for fam in CANONICAL_FAMILIES:
        sf = StateFamily(fam, 0.8)
        rho = densify(build_state(sf))
        a0, a1, b0, b1 = ms.canonical_observables(sf)
        assert ms.conditional_probability(rho, b0, 0, a0, 0) == pytest.approx(1.0)
        assert ms.conditional_probability(rho, b1, 0, a1, 0) == pytest.approx(1.0)


def test_conditional_zero_marginal():
    rho = densify(np.array([1, 0, 0, 0]))
    with pytest.raises(ZeroDivisionError):
        ms.conditional_probability(rho, ms.SIGMA_Z, 0, ms.SIGMA_Z, 1)


def test_assemblage_consistency():
    rho = densify(build_state(StateFamily("PhiPlus", 0.6)))
    sig = ms.assemblage(rho, ms.SIGMA_X)
    assert np.allclose(sig[0] + sig[1], ms.assemblage(rho, ms.SIGMA_Z)[0] + ms.assemblage(rho, ms.SIGMA_Z)[1])
    assert np.trace(sig[0]).real == pytest.approx(ms.alice_marginal(rho, ms.SIGMA_X, 0))


def test_waveplates_unitary():
    for chi in np.linspace(0, math.pi, 7):
        for u in (ms.hwp(chi), ms.qwp(chi)):
            assert np.allclose(u.conj().T @ u, np.eye(2))
    assert np.allclose(ms.hwp(0), SZ)
    assert np.allclose(ms.hwp(math.pi / 4), SX)
    # quarter-wave plate at 0 is diag(1, i)
    assert np.allclose(ms.qwp(0), np.diag([1, 1j]))


@pytest.mark.parametrize("delta", np.linspace(0, 2 * math.pi, 9))
def test_waveplate_sequences_realize_phase(delta):
    meas = ms.waveplate_sequence(ms.measurement_side_sequence(delta))
    prep = ms.waveplate_sequence(ms.preparation_side_sequence(delta))
    assert equal_up_to_phase(meas, ms.u_delta(delta), 1e-9)
    assert equal_up_to_phase(prep, ms.u_delta(-delta), 1e-9)
    # the preparation train maps the delta = 0 state to the phased one
    a = 0.6
    psi0 = build_state(StateFamily("PhiPlus", a))
    psid = build_state(StateFamily("PhiDelta", a, delta))
    out = np.kron(prep, np.eye(2)) @ psi0
    assert abs(abs(np.vdot(out, psid)) - 1) < 1e-9


def test_phase_adapted_observables():
    delta, a = 1.1, 0.7
    rho = densify(build_state(StateFamily(Family.PHI_DELTA, a, delta)))
    a0, a1 = ms.phase_adapted_observables(ms.theta_max(a), delta)
    assert ms.conditional_probability(rho, ms.SIGMA_Z, 0, a0, 0) == pytest.approx(1.0)
    assert ms.conditional_probability(rho, ms.SIGMA_X, 0, a1, 0) == pytest.approx(1.0)


def test_unknown_waveplate():
    with pytest.raises(ValueError):
        ms.waveplate_sequence([("X", 0.0)])
