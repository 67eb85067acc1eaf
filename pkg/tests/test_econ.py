import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otrlab.econ import (
    DomainError,
    EconParams,
    Strategy,
    cheat_threshold_l_slash,
    expected_cheat_profit,
    otr_settlement,
    p_catch,
    poq_baseline_settlement,
    profit_root_in_p_fish,
    simulate_cheat_settlements,
    will_cheat,
)
from otrlab.model_exec import table4_quality

probs = st.floats(0, 1)


def test_p_catch_examples():
    assert p_catch(0, 0) == 0
    assert p_catch(1, 0.3) == 1
    assert p_catch(0.01, 0.5) == pytest.approx(0.505)
    rng = np.random.default_rng(3)
    n = 200_000
    freq = ((rng.random(n) < 0.01) | (rng.random(n) < 0.5)).mean()
    assert abs(freq - 0.505) < 3 * math.sqrt(0.505 * 0.495 / n)


def test_p_catch_domain():
    with pytest.raises(DomainError):
        p_catch(1.5, 0)
    with pytest.raises(DomainError):
        EconParams(p_fish=-0.1)


def test_expected_profit_examples():
    assert expected_cheat_profit(EconParams(p_fish=1.0, l_slash=90.0)) == -90.0
    assert expected_cheat_profit(EconParams(rho=0, p_fish=0)) == pytest.approx(0.80)
    p = EconParams(rho=0.01, p_fish=0.0, l_slash=100.0)
    assert expected_cheat_profit(p) == pytest.approx(0.99 * 0.80 - 1.00)
    assert expected_cheat_profit(p) == pytest.approx(-0.208)
    sims = simulate_cheat_settlements(p, 1_000_000, np.random.default_rng(9))
    assert abs(sims.mean() - (-0.208)) < 3 * sims.std() / math.sqrt(sims.size)


def test_will_cheat_examples():
    assert not will_cheat(EconParams(g_cheat=0.0, rho=0.01, p_fish=0.0))
    assert will_cheat(EconParams(rho=0.0, p_fish=0.0, g_cheat=0.5))
    assert not will_cheat(EconParams())  # default economics deter
    assert not will_cheat(EconParams(rho=0.5, p_fish=0.0, g_cheat=1.0, l_slash=1.0))  # tie -> honest


@settings(max_examples=20, deadline=None)
@given(rho=probs, p_fish=probs, l_slash=st.floats(0, 200), r=st.floats(0.1, 2), c=st.floats(0, 0.1),
       seed=st.integers(0, 2**32))
def test_closed_form_matches_monte_carlo(rho, p_fish, l_slash, r, c, seed):
    params = EconParams(rho=rho, p_fish=p_fish, l_slash=l_slash, r_user=r, c_small=c)
    sims = simulate_cheat_settlements(params, 50_000, np.random.default_rng(seed))
    se = sims.std() / math.sqrt(sims.size)
    assert abs(sims.mean() - expected_cheat_profit(params)) <= 3 * se + 1e-9


@settings(max_examples=200)
@given(a=probs, b=probs, pf=probs, g=st.floats(0, 10), L=st.floats(0, 100))
def test_deterrence_monotonicity(a, b, pf, g, L):
    lo, hi = sorted((a, b))
    assert will_cheat(EconParams(rho=lo, p_fish=pf, g_cheat=g, l_slash=L)) >= \
        will_cheat(EconParams(rho=hi, p_fish=pf, g_cheat=g, l_slash=L))
    assert will_cheat(EconParams(rho=pf, p_fish=lo, g_cheat=g, l_slash=L)) >= \
        will_cheat(EconParams(rho=pf, p_fish=hi, g_cheat=g, l_slash=L))
    assert will_cheat(EconParams(rho=pf, p_fish=pf, g_cheat=g, l_slash=lo * 100)) >= \
        will_cheat(EconParams(rho=pf, p_fish=pf, g_cheat=g, l_slash=hi * 100))
    assert will_cheat(EconParams(rho=pf, p_fish=pf, g_cheat=lo * 10, l_slash=L)) <= \
        will_cheat(EconParams(rho=pf, p_fish=pf, g_cheat=hi * 10, l_slash=L))


def test_threshold_boundary():
    p = EconParams(rho=0.1, p_fish=0.2)
    t = cheat_threshold_l_slash(p)
    assert will_cheat(EconParams(rho=0.1, p_fish=0.2, l_slash=t * 0.999))
    assert not will_cheat(EconParams(rho=0.1, p_fish=0.2, l_slash=t))


def test_profit_root():
    # rho alone already deters at the default penalty: no crossing in [0, 1]
    assert profit_root_in_p_fish(EconParams(rho=0.01, l_slash=90.0)) is None
    root = profit_root_in_p_fish(EconParams(rho=0.01, l_slash=1.0))
    assert 0 < root < 1
    assert expected_cheat_profit(EconParams(rho=0.01, l_slash=1.0, p_fish=root)) == pytest.approx(0, abs=1e-12)


def test_poq_settlements():
    qm = table4_quality()
    params = EconParams()
    rng = np.random.default_rng(4)
    adv = poq_baseline_settlement(qm, "adversarial-8b", params, rng, n=10_000)
    assert adv.mean() - 3 * adv.std() / 100 > 0
    honest = poq_baseline_settlement(qm, "honest-70b", params, rng, n=10_000)
    assert honest.mean() == pytest.approx(params.r_user - params.c_large, abs=0.01)
    never = table4_quality(acceptance_threshold=1.01)
    out = poq_baseline_settlement(never, "adversarial-8b", params, rng, n=100)
    assert (out == -params.c_small).all()


def test_otr_settlement():
    p = EconParams()
    assert otr_settlement(Strategy.DOWNGRADE, p, ["Rejected"]) == [-p.c_small]
    assert otr_settlement(Strategy.HONEST, p, ["HardFinal"]) == [p.r_user - p.c_large]
    assert otr_settlement(Strategy.FORGED_ATTESTATION, p, ["Slashed"]) == [-p.l_slash]
