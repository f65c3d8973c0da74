import numpy as np
import pytest

from gbmcouple import policies
from gbmcouple.params import ProblemSpec, derive
from gbmcouple.policies import Constant, GridFeedback, Mirror, Switching, Synchronous, switching_policy


def _d():
    return derive(ProblemSpec(x=2, y=1, a1=0, a2=1, sigma1=1, sigma2=1))


def test_constant_bounds():
    Constant(0.0)
    Constant(-1.0)
    Constant(1.0)
    with pytest.raises(ValueError):
        Constant(1.5)


def test_switching_validation():
    with pytest.raises(ValueError, match="contained"):
        Switching(entry_box=(0, 1, 0, 1), exit_box=(0.5, 1, 0, 1), c_in=1, c_out=-1)
    with pytest.raises(ValueError, match="order"):
        Switching(entry_box=(1, 0, 0, 1), exit_box=(0, 1, 0, 1), c_in=1, c_out=-1)
    with pytest.raises(ValueError):
        Switching(entry_box=(0, 1, 0, 1), exit_box=(0, 1, 0, 1), c_in=2, c_out=-1)


def test_switching_policy_builder():
    d = _d()
    p = switching_policy(d, "plus", (0.4, 0.5), (0.1, 0.2))
    assert p.c_out == -1.0 and p.c_in == 1.0
    assert p.entry_box == pytest.approx((0.3, 0.5, 0.3, 0.7))
    assert p.exit_box == pytest.approx((0.2, 0.6, 0.1, 0.9))
    m = switching_policy(d, "minus", (0.4, 0.5), (0.1, 0.2))
    assert m.c_out == 1.0 and m.c_in == -1.0
    with pytest.raises(ValueError):
        switching_policy(d, "plus", (-0.1, 0.5), (0.1, 0.1))


def test_switching_phase_transitions():
    d = _d()
    p = switching_policy(d, "plus", (0.5, 0.5), (0.1, 0.1))
    enc = p.encode()
    from gbmcouple.simulate import _controls_numpy

    z = np.array([0.5, 0.9, 0.5])
    phase = np.zeros(3, dtype=np.uint8)
    # outside the time window: nothing switches
    c, phase = _controls_numpy(enc, z, 0.1, phase)
    assert np.all(c == -1.0) and np.all(phase == 0)
    # inside entry box in both coordinates: path 0 flips on
    c, phase = _controls_numpy(enc, z, 0.5, phase)
    assert c[0] == 1.0 and c[1] == -1.0
    assert phase[0] == 1 and phase[1] == 0
    # leaving the exit box in time: flips off permanently
    c, phase = _controls_numpy(enc, z, 0.75, phase)
    assert c[0] == -1.0 and phase[0] == 2
    c, phase = _controls_numpy(enc, z, 0.5, phase)
    assert phase[0] == 2 and c[0] == -1.0


def test_grid_feedback_validation_and_lookup():
    zax = np.linspace(0, 2, 5)
    sax = np.linspace(0, 1, 3)
    ctrl = np.array([[1, 1, -1, -1, 1], [1, -1, -1, 1, 1], [-1, 1, 1, 1, -1]], dtype=np.int8)
    g = GridFeedback(z_axis=zax, s_axis=sax, controls=ctrl, horizon=1.0)
    from gbmcouple.simulate import _controls_numpy

    enc = g.encode()
    # t = 0 -> remaining s = 1.0 -> row 2; z = 0.9 -> node 2
    c, _ = _controls_numpy(enc, np.array([0.9]), 0.0, np.zeros(1, dtype=np.uint8))
    assert c[0] == 1.0
    # t = 1 -> s = 0 -> row 0; z = 2.4 clamps to last node
    c, _ = _controls_numpy(enc, np.array([2.4]), 1.0, np.zeros(1, dtype=np.uint8))
    assert c[0] == 1.0
    with pytest.raises(ValueError, match="-1 or"):
        GridFeedback(z_axis=zax, s_axis=sax, controls=np.zeros((3, 5)), horizon=1.0)
    with pytest.raises(ValueError, match="uniform"):
        GridFeedback(z_axis=np.array([0, 1, 3.0]), s_axis=sax, controls=ctrl[:, :3], horizon=1.0)


def test_policy_json_round_trip():
    d = _d()
    for p in [Mirror(), Synchronous(), Constant(-0.25), switching_policy(d, "plus", (0.4, 0.5), (0.1, 0.2))]:
        q = policies.policy_from_json(p.to_json())
        assert q == p
    with pytest.raises(ValueError, match="variant"):
        policies.policy_from_json({"variant": "maximal"})
    with pytest.raises(ValueError, match="unknown"):
        policies.policy_from_json({"variant": "constant", "c": 0.1, "x": 2})
