import math

import cvxpy as cp
import numpy as np
import pytest

from steercert import robustness as rb
from steercert.measurements import SIGMA_X, SIGMA_Z
from steercert.steering import S_LHS, exact_statistics, fgsi_value
from steercert.states import densify
from conftest import random_density

PHI = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def sdp_extractability(rho, target):
    """Optimum of <t|(L x id)(rho)|t> over all qubit channels L, via the Choi matrix."""
    tt = np.outer(target, target.conj())
    choi = cp.Variable((4, 4), hermitian=True)
    out = 0
    for i in range(2):
        for j in range(2):
            # L(|i><j|) = sum_ab J[(a, i), (b, j)] |a><b|
            li = cp.bmat([[choi[2 * a + i, 2 * b + j] for b in range(2)] for a in range(2)])
            out = out + cp.kron(li, rho.reshape(2, 2, 2, 2)[i, :, j, :])
    cons = [choi >> 0, cp.partial_trace(choi, [2, 2], axis=0) == np.eye(2)]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(tt @ out))), cons)
    prob.solve()
    return prob.value


def test_q_bound_endpoints():
    lam = 1 / math.sqrt(2)
    assert rb.q_bound(S_LHS, lam) == pytest.approx(0.5)
    assert rb.q_bound(1.0, lam) == pytest.approx(0.5)
    assert rb.q_bound(2.0, lam) == pytest.approx(1.0)
    assert rb.q_bound(2.0, 0.9) == pytest.approx(1.0)
    assert rb.q_bound(S_LHS, 0.9) == pytest.approx(0.81)
    s = np.linspace(S_LHS, 2, 20)
    assert np.all(np.diff([rb.q_bound(x, lam) for x in s]) > 0)
    with pytest.raises(ValueError):
        rb.q_bound(1.9, 0.5)
    with pytest.raises(ValueError):
        rb.q_bound(2.1, lam)


def test_target_state_is_pure_and_rotated_bell():
    psi = rb.target_state_rotated()
    assert np.allclose(psi @ psi, psi)
    assert np.trace(psi).real == pytest.approx(1.0)
    # Bob's conditional states are eigenstates of sx and sz
    w, v = np.linalg.eigh(psi)
    vec = v[:, -1]
    assert w[-1] == pytest.approx(1.0)
    assert abs(np.linalg.svd(vec.reshape(2, 2), compute_uv=False)[0]) == pytest.approx(1 / math.sqrt(2))


def test_g_weight_range():
    assert rb.g_weight(0) == pytest.approx(0.0, abs=1e-15)
    assert rb.g_weight(math.pi / 4) == pytest.approx(1.0)
    for v in np.linspace(0, math.pi / 4, 50):
        w0, w1 = rb.ExtractionChannel(v).weights
        assert w0 >= 0 and w1 >= -1e-15
        assert w0 + w1 == pytest.approx(1.0)


def test_extraction_channel_trace_preserving():
    ch = rb.ExtractionChannel(0.3)
    ks = ch.kraus()
    assert np.allclose(sum(k.conj().T @ k for k in ks), np.eye(2))
    rho = rb.target_state_rotated()
    assert np.allclose(rb.apply_alice_kraus(ks, rho), ch.apply(rho))
    with pytest.raises(ValueError):
        rb.ExtractionChannel(2.0)


@pytest.mark.parametrize("v", np.linspace(0, math.pi / 4, 11))
def test_k_closed_form_matches_channel(v):
    direct = rb.channel_apply(rb.ExtractionChannel(v), rb.target_state_rotated())
    assert np.max(np.abs(rb.k_operator_closed_form(v) - direct)) < 1e-12


def test_inequality_tight_on_target():
    psi = rb.target_state_rotated()
    for v in np.linspace(0, math.pi / 4, 25):
        gap = np.trace(rb.k_operator(v) @ psi).real - rb.S_COEFF * np.trace(rb.w_operator(v) @ psi).real - rb.MU_COEFF
        assert abs(gap) < 1e-12
        bad = np.trace(rb.k_operator(v) @ psi).real - 1.01 * rb.S_COEFF * np.trace(rb.w_operator(v) @ psi).real - rb.MU_COEFF
        assert abs(bad) > 1e-3


def test_t_operator_is_not_psd():
    # recorded finding: with the printed coefficients T(v) has negative spectrum
    check = rb.verify_operator_inequality(200)
    assert not check.ok
    assert check.worst_vartheta == pytest.approx(0.0)
    assert check.worst_margin == pytest.approx(-(1.5 + math.sqrt(2)), abs=1e-9)


def test_block_structure():
    p0, p1 = rb.block_projector(0), rb.block_projector(1)
    assert np.allclose(p0 + p1, np.eye(4))
    assert np.allclose(p0 @ p1, 0)
    for x in (0, 1):
        b = rb.block_basis(x)
        assert b.shape == (4, 2)
        assert np.allclose(b @ b.conj().T, rb.block_projector(x))


@pytest.mark.parametrize("v", np.linspace(0, math.pi / 4, 9))
def test_trace_mx_closed_form(v):
    for x in (0, 1):
        m = rb.block_matrix(v, x)
        assert rb.trace_mx_closed_form(v, x) == pytest.approx(np.trace(m).real, abs=1e-10)


def test_mixture_fgsi_is_affine_and_exact():
    for q in np.linspace(0, 1, 6):
        rho = rb.mixture_family(q)
        s = fgsi_value(exact_statistics(rho, (SIGMA_Z, SIGMA_X), (SIGMA_Z, SIGMA_X), ((0, 0), (1, 1))))
        assert s == pytest.approx(rb.mixture_fgsi(q), abs=1e-12)


def test_extractability_trivial_cases(rng):
    assert rb.extractability_estimate(densify(PHI), PHI, restarts=1) == pytest.approx(1.0, abs=1e-8)
    prod = np.kron(random_density(rng, 2), random_density(rng, 2))
    assert rb.extractability_estimate(prod, PHI, restarts=2) <= 0.5 + 1e-9
    # any channel on Alice leaves I/4 at fidelity 1/4
    assert rb.extractability_estimate(np.eye(4) / 4, PHI, restarts=1) == pytest.approx(0.25, abs=1e-9)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7])
def test_extractability_matches_sdp_on_mixture(q):
    rho = rb.mixture_family(q)
    ref = sdp_extractability(rho, PHI)
    got = rb.extractability_estimate(rho, PHI, restarts=4)
    assert got == pytest.approx(ref, abs=2e-4)
    assert rb.extractability_estimate(rho, PHI, family="dephasing", restarts=2) <= got + 1e-6


def test_extractability_matches_sdp_random(rng):
    for _ in range(3):
        rho = random_density(rng, rank=2)
        assert rb.extractability_estimate(rho, PHI, restarts=4) == pytest.approx(sdp_extractability(rho, PHI), abs=2e-4)


def test_extractability_kraus_valid():
    res = rb.extractability_search(rb.mixture_family(0.5), PHI, restarts=2)
    assert np.allclose(sum(k.conj().T @ k for k in res.kraus), np.eye(2), atol=1e-10)
    with pytest.raises(ValueError):
        rb.extractability_search(rb.mixture_family(0.5), PHI, family="bogus")


def test_robustness_report_outputs():
    rep = rb.robustness_report(1.95, grid_points=20)
    doc = rep.to_dict()
    assert doc["schema_version"] == 1
    assert doc["Q"] == pytest.approx(rb.q_bound(1.95, 1 / math.sqrt(2)))
    csv_text = rep.margins_csv()
    assert csv_text.splitlines()[0] == "vartheta,min_eig_T,lambda0,lambda1"
    assert len(csv_text.splitlines()) == 21
