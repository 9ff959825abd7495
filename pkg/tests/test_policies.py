import random

import numpy as np
import pytest

from cacwb.errors import ValidationError
from cacwb.policies import (
    FGB, FGC, LFC, NPS, UBT, UFB, UFC, MultiFGB, build_profile, evaluate_policy,
    policy_from_dict, policy_to_dict, reduction_check,
)
from cacwb.markov import erlang_b

import oracles


def _rows(spec):
    return build_profile(spec).accept.tolist()


def test_fgb_profile():
    assert _rows(FGB(3, 1)) == [[1, 1, 1], [1, 0, 0]]


def test_ufb_profile():
    assert _rows(UFB(3, 1, 2, 0.5)) == [[1, 1, 1], [1, 0.5, 0]]


def test_ubt_profile():
    assert _rows(UBT(4, (4, 2), (0.5,))) == [[1, 1, 1, 1], [1, 1, 0.5, 0.5]]


def test_lfc_profile_and_fgc_default_ramp():
    assert _rows(LFC(4, 2, 0.25)) == [[1] * 4, [1, 1, 0.25, 0]]
    assert _rows(LFC(3, 3, 0.25))[1] == [1, 1, 1]
    assert FGC(4).alpha == (1.0, 0.75, 0.5, 0.25, 0.0)
    assert _rows(FGC(4))[1] == [1.0, 0.75, 0.5, 0.25]


def test_profiles_match_literal_rules():
    rng = random.Random(2)
    for _ in range(30):
        c = rng.randint(1, 15)
        m1 = rng.randint(0, c)
        n1 = rng.randint(m1, c)
        th = sorted([c] + [rng.randint(0, c) for _ in range(rng.randint(1, 3))], reverse=True)
        for spec in (NPS(c), FGB(c, m1), FGC(c), LFC(c, m1, 0.3), UFC(c, 0.7), UFB(c, m1, n1, 0.4),
                     MultiFGB(c, tuple(th)), UBT(c, tuple(th), tuple([0.6] * (len(th) - 1)))):
            acc = build_profile(spec).accept
            d = policy_to_dict(spec)
            for k in range(1, spec.num_classes + 1):
                for i in range(c):
                    assert acc[k - 1, i] == float(oracles.accept_prob(d, k, i))


def test_nps_evaluation():
    m = evaluate_policy(NPS(2), (0.25, 0.75), 1.0).metrics
    assert m.blocking == pytest.approx((0.2, 0.2), abs=1e-15)


def test_hand_solved_evaluations():
    m = evaluate_policy(FGB(2, 1), (1.0, 1.0), 1.0).metrics
    assert (m.blocking[1], m.dropping) == pytest.approx((0.75, 0.25), abs=1e-15)
    m = evaluate_policy(UFB(3, 1, 2, 0.5), (1.0, 1.0), 1.0).metrics
    assert (m.blocking[1], m.dropping) == pytest.approx((0.6, 0.1), abs=1e-15)


@pytest.mark.parametrize("bad", [
    lambda: FGB(5, 6), lambda: FGB(0, 0), lambda: UFB(10, 6, 5, 0.5), lambda: UFB(10, 5, 6, 1.5),
    lambda: UFC(5, -0.1), lambda: FGC(3, (1, 0.5, 0.7, 0)), lambda: FGC(3, (1, 0.5, 0)),
    lambda: FGC(2, (0.9, 0.5, 0)), lambda: MultiFGB(10, (9, 5)), lambda: MultiFGB(10, (10, 5, 7)),
    lambda: MultiFGB(10, (10,)), lambda: UBT(10, (10, 5), (0.5, 0.5)), lambda: FGB(5, True),
])
def test_invalid_specs(bad):
    with pytest.raises(ValidationError):
        bad()


def test_degenerate_thresholds_are_legal():
    assert build_profile(UFB(5, 3, 3, 0.5)) == build_profile(FGB(5, 3))
    assert build_profile(FGB(5, 5)) == build_profile(NPS(5))
    MultiFGB(5, (5, 5, 2, 2))


def test_reduction_examples():
    assert reduction_check(UFB(100, 90, 94, 0.0)) == FGB(100, 90)
    assert reduction_check(UBT(120, (120, 110, 100, 90), (0, 0, 0))) == MultiFGB(120, (120, 110, 100, 90))
    assert reduction_check(UFC(10, 1.0)) == NPS(10)
    assert reduction_check(UFB(100, 90, 94, 0.5)) is None
    assert reduction_check(NPS(3)) is None


def test_reductions_hold_numerically():
    rng = random.Random(9)
    for _ in range(50):
        c = rng.randint(1, 60)
        m1 = rng.randint(0, c)
        n1 = rng.randint(m1, c)
        th = tuple(sorted([c] + [rng.randint(0, c) for _ in range(rng.randint(1, 3))], reverse=True))
        specs = [UFB(c, m1, n1, 0.0), UFB(c, m1, n1, 1.0), UFB(c, m1, m1, 0.3), UFC(c, 1.0),
                 LFC(c, m1, 0.0), LFC(c, m1, 1.0), UBT(c, th, (0.0,) * (len(th) - 1))]
        for spec in specs:
            red = reduction_check(spec)
            assert red is not None
            rates = [rng.uniform(0, 2 * c) for _ in range(spec.num_classes)]
            a = evaluate_policy(spec, rates, 1.0)
            b = evaluate_policy(red, rates, 1.0)
            np.testing.assert_allclose(a.distribution.p, b.distribution.p, atol=1e-12, rtol=0)
            np.testing.assert_allclose(a.metrics.blocking, b.metrics.blocking, atol=1e-12, rtol=0)


def test_priority_dominance():
    rng = random.Random(4)
    for _ in range(100):
        c = rng.randint(1, 50)
        m1 = rng.randint(0, c)
        n1 = rng.randint(m1, c)
        th = tuple(sorted([c] + [rng.randint(0, c) for _ in range(3)], reverse=True))
        for spec in (FGB(c, m1), UFB(c, m1, n1, rng.random()),
                     UBT(c, th, tuple(rng.random() for _ in range(3)))):
            b = evaluate_policy(spec, [rng.uniform(0, 2 * c) for _ in range(spec.num_classes)], 1.0).metrics.blocking
            assert all(x <= y + 1e-15 for x, y in zip(b, b[1:]))


def test_ufb_interpolates_between_guard_bands():
    rng = random.Random(8)
    for _ in range(30):
        c = rng.randint(2, 80)
        m1 = rng.randint(0, c)
        n1 = rng.randint(m1, c)
        rates = (rng.uniform(0, c), rng.uniform(0, 2 * c))
        lo = evaluate_policy(FGB(c, m1), rates, 1.0).metrics
        hi = evaluate_policy(FGB(c, n1), rates, 1.0).metrics
        prev = None
        for i in range(11):
            m = evaluate_policy(UFB(c, m1, n1, i / 10), rates, 1.0).metrics
            assert hi.blocking[1] - 1e-14 <= m.blocking[1] <= lo.blocking[1] + 1e-14
            assert lo.dropping - 1e-14 <= m.dropping <= hi.dropping + 1e-14
            if prev is not None:
                assert m.blocking[1] <= prev.blocking[1] + 1e-14
                assert m.dropping >= prev.dropping - 1e-14
            prev = m


def test_profile_deterministic():
    spec = UBT(30, (30, 20, 10), (0.4, 0.6))
    assert build_profile(spec) == build_profile(spec)


def test_dict_round_trip():
    for spec in (NPS(3), FGB(5, 2), FGC(3), LFC(5, 2, 0.1), UFC(4, 0.2), UFB(10, 4, 7, 0.3),
                 MultiFGB(6, (6, 3)), UBT(6, (6, 4, 2), (0.1, 0.9))):
        assert policy_from_dict(policy_to_dict(spec)) == spec
    assert policy_from_dict({"scheme": "FGC", "C": 4}) == FGC(4)


@pytest.mark.parametrize("doc", [
    {"C": 3}, {"scheme": "XYZ", "C": 3}, {"scheme": "FGB", "C": 5},
    {"scheme": "FGB", "C": 5, "M": 2, "N": 3}, {"scheme": "UFC", "C": 5, "alpha": [0.5]},
])
def test_dict_parse_errors(doc):
    with pytest.raises(ValidationError):
        policy_from_dict(doc)


def test_single_class_loss_is_erlang_b():
    m = evaluate_policy(MultiFGB(10, (10, 10)), (3.0, 4.0), 1.0).metrics
    assert m.blocking[0] == pytest.approx(erlang_b(10, 7.0), abs=1e-14)
