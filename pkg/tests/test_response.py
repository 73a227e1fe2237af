import math

import numpy as np
import pytest

from nhsense import (
    ChainSpec,
    ConvergenceError,
    DriveSpec,
    Frame,
    InstabilityError,
    PerturbationSpec,
    ResponseReport,
    SingularMatrixError,
    assemble_full,
    compute_report,
    steady_state_moments,
    time_domain_oracle,
)
from nhsense.response import Order


def _one_site():
    return ChainSpec(1, 0.0, 0.0, 1.0, 1.0, kappa=0.05)


def test_single_site_moment():
    sys = assemble_full(_one_site(), PerturbationSpec.onsite(0.0))
    mom = steady_state_moments(sys, DriveSpec(theta=0.0))
    x, p = mom.at(sys.chain, 1)
    assert math.isclose(abs(x), 2 * math.sqrt(2 / 0.05), rel_tol=1e-12)
    assert math.isclose(abs(x), 12.6491, abs_tol=1e-4)
    assert p == 0


@pytest.mark.parametrize("theta", [0.0, math.pi / 2])
def test_single_site_photons(theta):
    rep = compute_report(_one_site(), DriveSpec(theta=theta), PerturbationSpec.onsite(0.0))
    assert math.isclose(rep.n_tot, 80.0, rel_tol=1e-12)
    assert rep.signal == 0 and rep.noise == 0.5


def test_odd_chain_b_sites_empty():
    chain = ChainSpec(5, 0.6, 0.4, 1.1, 1.6, m=3)
    mom = steady_state_moments(assemble_full(chain, PerturbationSpec.onsite(0.0)), DriveSpec(theta=0.3))
    scale = np.max(np.abs(mom.vector))
    for n in range(1, 5):
        assert np.max(np.abs(mom.at(chain, n, "B"))) <= 1e-15 * scale


def test_p_drive_leaves_x_empty():
    chain = ChainSpec(5, 0.6, 0.4, 1.1, 1.6, m=3)
    mom = steady_state_moments(assemble_full(chain, PerturbationSpec.onsite(0.0)), DriveSpec(theta=math.pi / 2))
    assert all(mom.at(chain, n)[0] == 0.0 for n in range(1, 6))


@pytest.mark.parametrize("phi_meas", [0.0, math.pi / 8, math.pi / 4, math.pi / 2])
@pytest.mark.parametrize("n_th", [0.0, 0.7])
def test_noise_floor(phi_meas, n_th):
    chain = ChainSpec(6, 0.5, 0.3, 0.7, 0.4, m=2, parity="even")
    rep = compute_report(chain, DriveSpec(phi_meas=phi_meas, n_th=n_th), PerturbationSpec.nhse(0.0))
    assert abs(rep.noise - (n_th + 0.5)) <= 1e-10
    assert rep.signal == 0


def test_onsite_linear_example():
    drive = DriveSpec(theta=math.pi / 2, phi_meas=0.0, tau=100.0)
    rep = compute_report(_one_site(), drive, PerturbationSpec.onsite(1e-6), order=Order.LINEAR)
    assert math.isclose(rep.signal, 32 * 100 * (1e-6 / 0.05) ** 2, rel_tol=1e-10)
    assert math.isclose(rep.signal, 1.28e-6, rel_tol=1e-10)


@pytest.mark.parametrize("pert", [PerturbationSpec.onsite(), PerturbationSpec.nhse(phi=math.pi / 2)])
def test_signal_quadratic_onset(pert, drive_pi4):
    chain = ChainSpec(5, 0.6, 0.4, 1.1, 1.6, m=2)
    eps = np.logspace(-9, -7, 5)
    sig = [compute_report(chain, drive_pi4, pert, e).signal for e in eps]
    slope = np.polyfit(np.log(eps), np.log(sig), 1)[0]
    assert abs(slope - 2) <= 0.01


def test_snr_bound(fig5_chain, drive_pi2):
    bound = 8 * drive_pi2.tau * drive_pi2.beta_abs**2 / (2 * drive_pi2.n_th + 1)
    for n in range(1, 26, 3):
        for eps in (1e-6, 1e-4, 1e-2):
            rep = compute_report(fig5_chain.with_(n_cells=n), drive_pi2, PerturbationSpec.onsite(eps))
            assert rep.snr <= bound * (1 + 1e-9)


def test_report_invariants(fig6_chain, drive_pi4):
    rep = compute_report(fig6_chain, drive_pi4, PerturbationSpec.nhse(1e-4, math.pi / 2))
    assert rep.signal >= 0 and rep.noise > 0 and rep.n_tot > 0
    assert math.isclose(rep.snr, rep.signal / rep.noise_avg)
    assert math.isclose(rep.snr_per_photon, rep.snr / rep.n_tot_avg)
    assert math.isclose(rep.log10_snr, math.log10(rep.snr))


def test_report_roundtrip(fig6_chain, drive_pi4):
    rep = compute_report(fig6_chain, drive_pi4, PerturbationSpec.nhse(1e-4, math.pi / 2))
    d = rep.to_dict()
    assert d["noise_avg"] == rep.noise_avg
    assert ResponseReport.from_dict(d) == rep


def test_frames_agree(fig6_chain, drive_pi4):
    pert = PerturbationSpec.nhse(1e-3, 0.4)
    a = compute_report(fig6_chain, drive_pi4, pert, frame=Frame.LAB)
    b = compute_report(fig6_chain, drive_pi4, pert, frame=Frame.SQUEEZED)
    for f in ("signal", "noise", "n_tot", "snr"):
        assert math.isclose(getattr(a, f), getattr(b, f), rel_tol=1e-10)


def test_linear_order_matches_exact_at_small_eps(fig6_chain, drive_pi4):
    pert = PerturbationSpec.nhse(1e-12, math.pi / 2)
    a = compute_report(fig6_chain, drive_pi4, pert, order="linear")
    b = compute_report(fig6_chain, drive_pi4, pert, order="exact")
    assert math.isclose(a.signal, b.signal, rel_tol=1e-6)


def test_unstable_chain_rejected(drive_pi4):
    with pytest.raises(InstabilityError):
        compute_report(ChainSpec(3, 1.2, 0.5, 1.0, 0.4), drive_pi4, PerturbationSpec.onsite(1e-3))


def test_singular_matrix_detected(drive_pi4):
    # a dark mode that the damped site never sees leaves the unperturbed matrix singular
    chain = ChainSpec(1, 0.0, 0.0, 1.0, 1.0, kappa=0.0)
    with pytest.raises((SingularMatrixError, InstabilityError)):
        compute_report(chain, drive_pi4, PerturbationSpec.onsite(1e-3))


def test_oracle_single_site():
    sys = assemble_full(_one_site(), PerturbationSpec.onsite(0.0))
    res = time_domain_oracle(sys, DriveSpec(theta=0.0))
    x, _ = res.moments.at(sys.chain, 1)
    assert math.isclose(abs(x), 2 * math.sqrt(2 / 0.05), rel_tol=1e-6)


def test_oracle_matches_inversion_fig4(fig4_chain):
    drive = DriveSpec(theta=0.3)
    sys = assemble_full(fig4_chain.with_(n_cells=4), PerturbationSpec.onsite(0.0))
    inv = steady_state_moments(sys, drive).vector
    ode = time_domain_oracle(sys, drive).moments.vector
    assert np.linalg.norm(ode - inv) <= 1e-6 * np.linalg.norm(inv)


def test_oracle_reports_divergence():
    chain = ChainSpec(3, 1.2, 0.5, 1.0, 0.4)
    sys = assemble_full(chain, PerturbationSpec.onsite(0.0))
    with pytest.raises(ConvergenceError) as info:
        time_domain_oracle(sys, DriveSpec(theta=0.3), t_end=1e6)
    assert info.value.diverged


def test_oracle_timeout_carries_residual():
    sys = assemble_full(ChainSpec(4, 0.5, 0.3, 0.7, 0.4), PerturbationSpec.onsite(0.0))
    with pytest.raises(ConvergenceError) as info:
        time_domain_oracle(sys, DriveSpec(theta=0.3), t_end=1.0)
    assert info.value.residual > 0 and not info.value.diverged


@pytest.mark.parametrize("kw", [dict(beta_abs=-1.0), dict(n_th=-0.1), dict(tau=0.0)])
def test_drive_validation(kw):
    with pytest.raises(ValueError):
        DriveSpec(**kw)


def test_default_frame_falls_back_when_lab_is_singular(fig4_chain, drive_pi4):
    from nhsense.closed_form import analytic_linear_report

    chain = fig4_chain.with_(n_cells=14)
    pert = PerturbationSpec.onsite(1e-6)
    with pytest.raises(SingularMatrixError):
        compute_report(chain, drive_pi4, pert, order="linear", frame=Frame.LAB)
    rep = compute_report(chain, drive_pi4, pert, order="linear")
    assert math.isclose(rep.signal, analytic_linear_report(chain, drive_pi4, pert).signal, rel_tol=1e-8)
