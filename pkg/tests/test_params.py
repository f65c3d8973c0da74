import json
import math

import numpy as np
import pytest

from gbmcouple import params
from gbmcouple.params import ProblemSpec, SpecError, classify_finite_horizon, classify_stationary, derive


def test_derive_symmetric_identity_case():
    d = derive(ProblemSpec(x=1, y=1, a1=0, a2=0, sigma1=1, sigma2=1))
    assert d.mu == 0 and d.sigma_plus == 2 and d.sigma_minus == 0 and d.z0 == 0
    assert not d.swapped


def test_derive_hand_evaluation():
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=1, sigma1=1, sigma2=1))
    assert d.mu == 1 and d.sigma_plus == 2 and d.sigma_minus == 0
    assert d.z0 == pytest.approx(math.log(2), abs=0)


def test_derive_swap():
    d = derive(ProblemSpec(x=1, y=2, a1=0, a2=0, sigma1=1, sigma2=2))
    assert d.swapped
    # roles exchanged: drift gap computed on the swapped parameters
    assert d.mu == pytest.approx(0 - 0 + 4 / 2 - 1 / 2)
    assert d.z0 == pytest.approx(math.log(2))
    assert d.spec.x == 2 and d.spec.sigma1 == 2 and d.spec.sigma2 == 1


def test_swap_symmetry_property():
    rs = np.random.RandomState(0)
    for _ in range(200):
        s = ProblemSpec(
            x=rs.uniform(0.2, 5),
            y=rs.uniform(0.2, 5),
            a1=rs.uniform(-2, 2),
            a2=rs.uniform(-2, 2),
            sigma1=rs.uniform(0.1, 2),
            sigma2=rs.uniform(0.1, 2),
        )
        a, b = derive(s), derive(s.swapped())
        assert a.mu == b.mu and a.sigma_plus == b.sigma_plus
        assert a.sigma_minus == b.sigma_minus and a.z0 == b.z0
        assert a.swapped != b.swapped
        assert abs(a.sigma_plus) > abs(a.sigma_minus) >= 0
        # stored mu recomputable exactly from the reduced spec
        sp = a.spec
        assert a.mu == sp.a2 - sp.a1 + sp.sigma1**2 / 2 - sp.sigma2**2 / 2


def test_z0_snapping_to_diagonal():
    d = derive(ProblemSpec(x=1 + 1e-14, y=1, a1=0, a2=0, sigma1=1, sigma2=1))
    assert d.z0 == 0.0


def test_validation_errors():
    with pytest.raises(SpecError):
        ProblemSpec(x=0, y=1, a1=0, a2=0, sigma1=1, sigma2=1)
    with pytest.raises(SpecError):
        ProblemSpec(x=1, y=-1, a1=0, a2=0, sigma1=1, sigma2=1)
    with pytest.raises(SpecError):
        ProblemSpec(x=1, y=1, a1=0, a2=0, sigma1=1, sigma2=-1)
    with pytest.raises(SpecError):
        ProblemSpec(x=1, y=1, a1=0, a2=0, sigma1=0, sigma2=1)
    with pytest.raises(SpecError):
        ProblemSpec(x=1, y=1, a1=math.inf, a2=0, sigma1=1, sigma2=1)


def test_json_round_trip_and_unknown_fields():
    s = ProblemSpec(x=2, y=1, a1=0.5, a2=-0.25, sigma1=0.7, sigma2=1.1)
    assert ProblemSpec.from_json(s.to_json()) == s
    assert ProblemSpec.from_json(json.dumps(s.to_json())) == s
    with pytest.raises(SpecError, match="unknown"):
        ProblemSpec.from_json({**s.to_json(), "extra": 1})
    with pytest.raises(SpecError, match="missing"):
        ProblemSpec.from_json({"x": 1, "y": 1})


def test_classify_finite_horizon_cases():
    # mu > 0, sigma_plus != 0: suboptimal at any horizon
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=1, sigma1=1, sigma2=1))
    for T in (0.1, 1.0, 10.0):
        v = classify_finite_horizon(d, "plus", T)
        assert v.verdict == "suboptimal" and v.reason == "mu_pos_sigma_nonzero"
    # mu <= 0: optimal
    d2 = derive(ProblemSpec(x=2, y=1, a1=0.5, a2=0, sigma1=1, sigma2=1))
    assert classify_finite_horizon(d2, "plus", 3.0).verdict == "optimal"
    # sigma_minus = 0, mu > 0: threshold at z0 / mu
    thr = d.z0 / d.mu
    assert classify_finite_horizon(d, "minus", 0.5).verdict == "optimal"
    assert classify_finite_horizon(d, "minus", 1.0).verdict == "suboptimal"
    assert classify_finite_horizon(d, "minus", thr).verdict == "suboptimal"
    # bad case: never couples
    d3 = derive(ProblemSpec(x=2, y=1, a1=1, a2=0, sigma1=1, sigma2=1))
    v3 = classify_finite_horizon(d3, "minus", 1.0)
    assert v3.verdict == "degenerate-deterministic" and v3.reason == "bad_case_tau_infinite"


def test_classify_monotone_in_horizon():
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=1, sigma1=1, sigma2=1))
    suboptimal_seen = False
    for T in np.linspace(0.05, 3.0, 60):
        v = classify_finite_horizon(d, "minus", float(T))
        if suboptimal_seen:
            assert v.verdict == "suboptimal"
        suboptimal_seen = v.verdict == "suboptimal"


def test_classify_rejects_degenerate_inputs():
    d = derive(ProblemSpec(x=1, y=1, a1=0, a2=0, sigma1=1, sigma2=1))
    with pytest.raises(ValueError):
        classify_finite_horizon(d, "plus", 1.0)
    d2 = derive(ProblemSpec(x=2, y=1, a1=0, a2=0, sigma1=1, sigma2=1))
    with pytest.raises(ValueError):
        classify_finite_horizon(d2, "plus", 0.0)
    with pytest.raises(ValueError):
        classify_finite_horizon(d2, "both", 1.0)


def test_classify_stationary():
    # mu > 0: every coupling succeeds, value 0
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=1, sigma1=1, sigma2=1))
    st = classify_stationary(d)
    assert st.inf.verdict == "optimal" and st.sup.verdict == "optimal"
    assert st.inf.value == 0.0 and st.sup.value == 0.0
    # z0 = 0: coupling time zero
    st0 = classify_stationary(derive(ProblemSpec(x=1, y=1, a1=0, a2=0, sigma1=1, sigma2=1)))
    assert st0.inf.value == 0.0 and st0.sup.value == 0.0
    # mu < 0: mirror value 1 - (x/y)^(2 mu / sigma_plus^2)
    d2 = derive(ProblemSpec(x=2, y=1, a1=1, a2=0, sigma1=1, sigma2=1))
    assert d2.mu == -1
    expected = 1 - math.exp(2 * d2.mu * d2.z0 / d2.sigma_plus**2)
    st2 = classify_stationary(d2)
    assert st2.inf.value == pytest.approx(expected, rel=1e-12)
    # synchronous never couples here: sigma_minus = 0, mu <= 0
    assert st2.sup.value == 1.0


def test_variance_rate_endpoints():
    d = derive(ProblemSpec(x=2, y=1, a1=0, a2=0, sigma1=0.6, sigma2=1.1))
    assert d.variance_rate(-1.0) == pytest.approx(d.sigma_plus**2)
    assert d.variance_rate(1.0) == pytest.approx(d.sigma_minus**2)
    c = np.linspace(-1, 1, 33)
    rates = d.variance_rate(c)
    assert np.all(np.diff(rates) < 0)


def test_spec_with_replaces_fields():
    s = ProblemSpec(x=2, y=1, a1=0, a2=0, sigma1=1, sigma2=1)
    assert params.spec_with(s, a2=0.5).a2 == 0.5
