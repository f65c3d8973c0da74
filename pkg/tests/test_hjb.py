import math

import numpy as np
import pytest

import gbmcouple as gc
from gbmcouple import analytic, hjb
from gbmcouple.params import ProblemSpec, derive


def _d(x=2.0, y=1.0, a1=0.0, a2=0.0, s1=0.5, s2=0.5):
    return derive(ProblemSpec(x=x, y=y, a1=a1, a2=a2, sigma1=s1, sigma2=s2))


def test_grid_validation_and_stability_rejection():
    with pytest.raises(ValueError):
        hjb.GridSpec(n_z=8, n_t=100)
    with pytest.raises(ValueError):
        hjb.GridSpec(n_z=64, n_t=100, boundary_mode="zero")
    d = _d(s1=1.0, s2=1.0)
    with pytest.raises(ValueError, match="unstable"):
        hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=512, n_t=64))


def test_surface_shape_and_boundary_values():
    d = _d(a2=-0.3)
    surf = hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=64, n_t=256, z_max=6.0))
    assert surf.values.shape == (257, 65)
    assert np.all(surf.values[:, 0] == 0.0)
    assert np.all(surf.values[0, 1:] == 1.0)
    assert np.all((surf.values >= 0) & (surf.values <= 1))
    # survival decreases with longer remaining time, increases with z
    assert np.all(np.diff(surf.values[:, 1:], axis=0) <= 1e-12)
    assert np.all(np.diff(surf.values[5], axis=0) >= -1e-12)


def test_converges_to_mirror_value_when_optimal():
    for mu, sign in ((-0.6, "plus"), (0.0, "plus")):
        d = _d(a2=mu)
        surf = hjb.solve(d, sign, 1.0, hjb.GridSpec(n_z=128, n_t=512, z_max=8.2))
        exact = analytic.phi(d, 1.0, sign, z=surf.z_axis[1:-1])
        err = np.max(np.abs(surf.values[-1, 1:-1] - exact))
        surf2 = hjb.solve(d, sign, 1.0, hjb.GridSpec(n_z=256, n_t=2048, z_max=8.2))
        exact2 = analytic.phi(d, 1.0, sign, z=surf2.z_axis[1:-1])
        err2 = np.max(np.abs(surf2.values[-1, 1:-1] - exact2))
        assert err < 5e-3
        assert 3.0 <= err / err2 <= 5.0


def test_minus_problem_converges_to_synchronous_value():
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=-0.5 + (0.7**2 - 0.3**2) / 2, sigma1=0.3, sigma2=0.7))
    assert d.mu == pytest.approx(-0.5)
    surf = hjb.solve(d, "minus", 1.0, hjb.GridSpec(n_z=256, n_t=2048, z_max=6.0))
    exact = analytic.phi(d, 1.0, "minus", z=surf.z_axis[1:-1])
    assert np.max(np.abs(surf.values[-1, 1:-1] - exact)) < 5e-3
    assert np.all(surf.controls[1:-1, 1:-1] == 1)


def test_extracted_policy_is_candidate_when_optimal():
    d = _d(a2=-0.4)
    surf = hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=64, n_t=256, z_max=6.0))
    assert np.all(surf.controls[1:-1, 1:-1] == -1)
    pol = hjb.extract_policy(surf)
    assert pol.horizon == 1.0


def test_suboptimal_case_uses_both_controls_and_beats_candidate():
    d = _d(a2=1.0, s1=1.0, s2=1.0)  # mu = 1
    surf = hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=256, n_t=4096))
    assert np.any(surf.controls == 1) and np.any(surf.controls == -1)
    f_val = surf.value_at(d.z0)
    assert f_val < float(analytic.phi(d, 1.0, "plus"))


def test_value_dominated_by_candidate_value():
    # minimizer cannot exceed the mirror policy's survival (up to scheme error)
    for a2 in (-0.5, 0.5):
        d = _d(a2=a2, s1=0.8, s2=0.9)
        grid = hjb.GridSpec(n_z=128, n_t=1024, z_max=8.0)
        surf = hjb.solve(d, "plus", 1.0, grid)
        exact = analytic.phi(d, 1.0, "plus", z=surf.z_axis[1:-1])
        assert np.all(surf.values[-1, 1:-1] <= exact + 5e-3)


def test_gap_report_consistency_all_regimes():
    sub = hjb.gap_report(_d(a2=1.0, s1=1.0, s2=1.0), "plus", 1.0, hjb.GridSpec(n_z=256, n_t=4096))
    assert sub.classifier_verdict == "suboptimal"
    assert sub.gap > sub.error_estimate and sub.numerically_suboptimal and sub.consistent

    opt = hjb.gap_report(_d(a2=-0.5), "plus", 1.0, hjb.GridSpec(n_z=128, n_t=512, z_max=8.2))
    assert opt.classifier_verdict == "optimal"
    assert abs(opt.gap) <= opt.error_estimate and opt.consistent

    # synchronous with mu > 0 and no volatility gap: threshold in T
    d = _d(a2=1.0, s1=1.0, s2=1.0)
    below = hjb.gap_report(d, "minus", 0.5, hjb.GridSpec(n_z=256, n_t=4096))
    assert below.classifier_verdict == "optimal" and below.consistent
    above = hjb.gap_report(d, "minus", 1.0, hjb.GridSpec(n_z=256, n_t=4096))
    assert above.classifier_verdict == "suboptimal" and above.consistent
    assert above.gap > above.error_estimate


def test_boundary_mode_one_close_to_analytic_mode():
    d = _d(a2=-0.3)
    a = hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=128, n_t=512, z_max=8.2))
    b = hjb.solve(d, "plus", 1.0, hjb.GridSpec(n_z=128, n_t=512, z_max=8.2, boundary_mode="one"))
    # truncation at 6+ standard deviations: boundary choice barely matters
    k = np.searchsorted(a.z_axis, d.z0)
    assert abs(a.values[-1, k] - b.values[-1, k]) < 1e-6


def test_policy_simulation_reproduces_value():
    d = _d(a2=1.0, s1=1.0, s2=1.0)
    grid = hjb.GridSpec(n_z=256, n_t=4096)
    surf = hjb.solve(d, "plus", 1.0, grid)
    rep = hjb.gap_report(d, "plus", 1.0, grid)
    pol = hjb.extract_policy(surf)
    cfg = gc.SimConfig(n_paths=100_000, dt=1e-3, horizon=1.0, master_seed=11)
    est = gc.estimate_survival(gc.simulate_tau(d, pol, cfg), 1.0)
    assert abs(est.mean - surf.value_at(d.z0)) <= 3 * est.std_error + rep.error_estimate


def test_default_z_max():
    d = _d(s1=1.0, s2=1.0, a2=1.0)
    assert hjb.default_z_max(d, 1.0) == pytest.approx(d.z0 + 6 * 2 + 1)
