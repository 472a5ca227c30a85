import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import duopoly_learning.trainer as trainer
from duopoly_learning.bargaining import DisagreementPoint, NashSolution
from duopoly_learning.harness import standard_quadratic
from duopoly_learning.market import QualityPair
from duopoly_learning.trainer import (
    DefectionError,
    InstanceError,
    SchemeConfig,
    TrainingState,
    alpha_high,
    alpha_low,
    bound_B,
    compute_tilde_b,
    hat_q_l,
    identity_outcome,
    initial_state,
    nash_target,
    run_scheme,
    threshold_roots,
)
from oracles import B_reference, u_high, u_low


@pytest.fixture(scope="module")
def instance():
    model = standard_quadratic(4, 0.65, seed=0)
    init = initial_state(model)
    return model, init, nash_target(model, init)


# values below were computed by bisection on U_h (oracles.B_reference)
@pytest.mark.parametrize("a,b,expected", [
    (0.0, 1.0, 0.0),
    (0.5, 1.0, 0.5),
    (0.0, 1.03, 0.0562309),
    (0.5, 1.03, 0.5201313),
])
def test_bound_B_values(a, b, expected):
    assert bound_B(a, b) == pytest.approx(expected, abs=1e-7)
    assert bound_B(a, b) == pytest.approx(B_reference(a, b), abs=1e-12)


def test_bound_B_domain():
    with pytest.raises(ValueError):
        bound_B(1.0, 1.1)
    with pytest.raises(ValueError):
        bound_B(0.3, 0.99)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(1.0, 1.5))
def test_bound_B_keeps_high_revenue(a, b):
    r = bound_B(a, b)
    assert r >= a - 1e-12
    assert b * u_high(r, 1.0) == pytest.approx(u_high(a, 1.0), rel=1e-9)


@pytest.mark.parametrize("q_prev,q_h_new,expected", [
    ((0.3, 0.6), 0.618, 0.3214412),
    ((0.5, 0.8), 0.824, 0.5264694),
])
def test_threshold_root_high_values(q_prev, q_h_new, expected):
    roots = threshold_roots(QualityPair(*q_prev), q_h_new)
    assert roots.root_high == pytest.approx(expected, abs=1e-7)
    assert u_high(roots.root_high, q_h_new) == pytest.approx(u_high(*q_prev), abs=1e-12)
    assert roots.root_high <= roots.root_low


def test_threshold_root_low_keeps_low_revenue():
    q_prev = QualityPair(0.3, 0.6)
    roots = threshold_roots(q_prev, 0.65)
    assert u_low(roots.root_low, 0.65) == pytest.approx(u_low(0.3, 0.6), abs=1e-12)
    # the right-most root sits past the peak of U_l
    assert roots.root_low > 4 / 7 * 0.65


def test_threshold_roots_no_improvement():
    roots = threshold_roots(QualityPair(0.3, 0.6), 0.6)
    assert roots.root_high == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        threshold_roots(QualityPair(0.3, 0.6), 0.59)


@pytest.mark.parametrize("q_prev,q_h_new,expected", [
    ((0.3, 0.6), 0.618, 0.3214412),
    ((0.5, 0.8), 0.824, 0.5264694),
    ((0.3, 0.6), 0.6, 0.3),
])
def test_hat_q_l_values(q_prev, q_h_new, expected):
    assert hat_q_l(QualityPair(*q_prev), q_h_new) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("args,expected", [
    ((0.321440, 0.3, 0.1), 0.21440),
    ((0.3, 0.3, 0.1), 0.0),
    ((0.4, 0.3, 100.0), 0.001),
    ((0.4, 0.3, 0.0), 0.0),
    ((0.9, 0.3, 0.1), 1.0),
])
def test_alpha_low(args, expected):
    assert alpha_low(*args) == pytest.approx(expected)


@pytest.mark.parametrize("args,expected", [
    ((0.6, 0.1, 10.0, 1.03), 0.1),
    ((0.6, 10.0, 10.0, 1.03), 0.0018),
    ((0.6, 0.0, 10.0, 1.03), 0.1),
    ((0.6, 0.1, 1e12, 1.03), 1e-12),
])
def test_alpha_high(args, expected):
    assert alpha_high(*args) == pytest.approx(expected)


def test_tilde_b_matches_reference_and_defining_inequality():
    tilde_b, rho = compute_tilde_b()
    assert 1.02 <= tilde_b <= 1.04
    assert 0.28 <= rho <= 0.38
    for r in np.arange(0.0, 1.0, 0.05):
        for b in np.linspace(1.0, tilde_b, 50):
            assert (4 - 5 * r) * math.log10(b) <= bound_B(r, b) - r + 1e-12


def test_tilde_b_caps_when_no_crossing():
    # near rho = 1 the left side is negative, so every b qualifies
    b = trainer._b_rho(0.9, np.arange(1.0, 2.0, 0.01), 2.0)
    assert b == 2.0


def test_initial_state(instance):
    model, init, nash = instance
    assert init.q_l < init.q_h <= model.max_quality
    np.testing.assert_allclose(init.x_l, model.owner_optimum("low"))
    assert init.rho == pytest.approx(init.q_l / init.q_h)
    assert nash.q_h_star == pytest.approx(model.max_quality)


def test_initial_state_rejects_unordered_instance():
    # symmetric instance with no warm-up: both firms tie
    from duopoly_learning.losses import make_complementary_quadratics
    model = make_complementary_quadratics(2, 0.8, 0.0, seed=0)
    with pytest.raises(InstanceError):
        initial_state(model, warm_steps=0)


def test_identity_outcome_relabels():
    p_l, p_h, u_l, u_h = identity_outcome(0.8, 0.4)
    q_p_l, q_p_h, q_u_l, q_u_h = identity_outcome(0.4, 0.8)
    assert (p_l, p_h, u_l, u_h) == (q_p_h, q_p_l, q_u_h, q_u_l)


def test_scheme_config_validation(instance):
    _, _, nash = instance
    with pytest.raises(ValueError):
        SchemeConfig("defection_free", 0, nash, 1.03)
    with pytest.raises(ValueError):
        SchemeConfig("defection_free", 10, nash, 1.0)
    assert SchemeConfig("one-sided-low", 10, nash, 1.03).scheme == "one_sided_low"


def run(instance, scheme, rounds=300):
    model, init, nash = instance
    return run_scheme(SchemeConfig(scheme, rounds, nash, compute_tilde_b()[0]), model, init)


def test_records_and_summary(instance):
    trace = run(instance, "defection_free", 50)
    assert len(trace.records) == 51
    assert [r.round for r in trace.records] == list(range(51))
    assert trace.records[0].alpha_h == 0.0
    assert trace.summary.defections_l == trace.summary.defections_h == 0
    assert trace.summary.nash_gap == pytest.approx(trace.summary.nash_star - trace.records[-1].nash_value)


def test_state_recomputed_from_params(instance):
    model, _, _ = instance
    trace = run(instance, "defection_free", 30)
    x_l, x_h = trace.extras["x_l_final"], trace.extras["x_h_final"]
    assert trace.records[-1].q_l == pytest.approx(model.quality(x_l), abs=1e-15)
    assert trace.records[-1].q_h == pytest.approx(model.quality(x_h), abs=1e-15)


def test_one_sided_low_freezes_low_firm(instance):
    trace = run(instance, "one_sided_low")
    assert len(set(trace.column("q_l"))) == 1
    assert np.all(np.diff(trace.column("u_l")) >= -1e-12)
    assert np.all(np.diff(trace.column("u_h")) >= -1e-12)


def test_one_sided_high_crosses_over(instance):
    trace = run(instance, "one_sided_high", 500)
    assert len(set(trace.column("q_h"))) == 1
    last = trace.records[-1]
    assert last.q_l > last.q_h
    # the overtaken firm now sells the cheaper model
    assert last.p_h < last.p_l


def test_complete_collapses(instance):
    trace = run(instance, "complete", 1000)
    last = trace.records[-1]
    assert abs(last.q_l - last.q_h) <= 1e-6
    assert max(last.u_l, last.u_h) <= 1e-3


def test_defection_free_respects_pacing_and_cap(instance):
    trace = run(instance, "defection_free")
    tilde_b = trace.summary.tilde_b
    q_l, q_h = np.array(trace.column("q_l")), np.array(trace.column("q_h"))
    assert np.all(q_h[1:] / q_h[:-1] <= tilde_b + 1e-9)
    for t in range(1, len(q_l)):
        assert q_l[t] <= hat_q_l(QualityPair(q_l[t - 1], q_h[t - 1]), q_h[t]) + 1e-9


def test_defection_error_carries_trace(instance, monkeypatch):
    model, init, nash = instance
    # a target far past the true Nash ratio plus a broken cap forces a defection
    fake = NashSolution(0.9 * nash.q_h_star, nash.q_h_star, 0.9, nash.objective_value,
                        DisagreementPoint(init.q))
    monkeypatch.setattr(trainer, "hat_q_l", lambda q_prev, q_h_new: q_h_new)
    cfg = SchemeConfig("defection_free", 200, fake, compute_tilde_b()[0])
    with pytest.raises(DefectionError) as info:
        run_scheme(cfg, model, init)
    last = info.value.trace.records[-1]
    assert last.defected_l or last.defected_h
    assert info.value.trace.summary.defections_h + info.value.trace.summary.defections_l >= 1


def test_run_is_deterministic(instance):
    a = run(instance, "defection_free", 100)
    b = run(instance, "defection_free", 100)
    assert a.records == b.records


def test_training_state_role_order():
    s = TrainingState(0, np.zeros(1), np.zeros(1), 0.7, 0.5)
    assert s.q == QualityPair(0.5, 0.7)
