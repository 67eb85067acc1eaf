import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otrlab.attest import generate_quote, make_nonce, measure_enclave
from otrlab.contract import (
    DEFAULT_PRICING,
    AmbiguousAttribution,
    Batch,
    MissingQueryData,
    Mode,
    ModelRegistry,
    PoEAStatus,
    SecurityParams,
    SpotResult,
    Status,
    Verifier,
    choose_rho,
    register_model,
    spot_check,
    validate_pricing,
    verify_poea,
    vrf_eval,
    vrf_index,
    vrf_verify,
)
from otrlab.dispute import WindowClosed
from otrlab.hashing import H
from otrlab.ledger import AlreadySlashed, InsufficientStake, StakeLedger
from otrlab.model_exec import run_inference

from conftest import BIG, SMALL


def _tuple(vendor, spec, query, eid="e", serves=None, compromised=False, forged=None, seq="s"):
    serves = serves or spec
    enc = vendor.provision(eid, serves.model_id, "v1", compromised=compromised)
    resp = run_inference(serves, query).response
    return generate_quote(enc, H(query), resp, make_nonce(0.0, 0), seq, forged_mrenclave=forged)


# -- registry / PoEA ----------------------------------------------------------

def test_register_then_accept(vendor, root):
    reg = register_model(ModelRegistry(), "llama3", measure_enclave("llama3", "v1"))
    enc = vendor.provision("e", "llama3", "v1")
    tup = generate_quote(enc, H(b"q"), b"r", make_nonce(0, 0))
    assert verify_poea(reg, tup, "llama3", root) is PoEAStatus.ACCEPT


def test_ambiguous_attribution():
    reg = register_model(ModelRegistry(), "llama3", b"h" * 32)
    with pytest.raises(AmbiguousAttribution):
        register_model(reg, "mistral", b"h" * 32)


def test_poea_outcomes(vendor, root, registry):
    honest = _tuple(vendor, BIG, b"q")
    assert verify_poea(registry, honest, BIG.model_id, root) is PoEAStatus.ACCEPT
    small = _tuple(vendor, SMALL, b"q", eid="s8")
    registry.register(SMALL.model_id, measure_enclave(SMALL.model_id, "v1"))
    assert verify_poea(registry, small, BIG.model_id, root) is PoEAStatus.REJECT_WRONG_MODEL
    stray = _tuple(vendor, BIG, b"q", eid="x", serves=BIG.__class__("other", 2, 2, 1))
    assert verify_poea(registry, stray, BIG.model_id, root) is PoEAStatus.REJECT_UNREGISTERED
    bad = honest.__class__(**{**honest.__dict__, "signature": bytes(64)})
    assert verify_poea(registry, bad, BIG.model_id, root) is PoEAStatus.REJECT_BAD_QUOTE


# -- VRF ----------------------------------------------------------------------

def test_vrf_determinism_and_verify():
    v, p = vrf_eval(b"k", b"xi", 3)
    assert (v, p) == vrf_eval(b"k", b"xi", 3)
    assert 0.0 <= v < 1.0
    assert vrf_verify(b"k", b"xi", 3, v, p)
    assert not vrf_verify(b"k", b"xi", 3, v / 2 if v else 0.5, p)
    assert not vrf_verify(b"k", b"xi", 4, v, p)


@settings(max_examples=100)
@given(n=st.integers(1, 64), proof=st.binary(min_size=32, max_size=32))
def test_vrf_index_range(n, proof):
    assert 0 <= vrf_index(proof, n) < n


# -- pricing ------------------------------------------------------------------

@pytest.mark.parametrize("value,rho", [(0.01, 0.0), (1000, 1.0), (5000, 1.0), (1.0, 0.01),
                                       (50, 0.01), (99.99, 0.01), (100, 0.1), (999, 0.1)])
def test_choose_rho(value, rho):
    assert choose_rho(value) == rho


def test_validate_pricing():
    assert validate_pricing(DEFAULT_PRICING) == []
    assert validate_pricing([(1, 0.1), (0, 0.2)])
    assert validate_pricing([(0, 0.5), (1, 0.1)])
    assert validate_pricing([])


# -- spot check -----------------------------------------------------------------

def test_spot_check(vendor, specs):
    da = {H(b"q"): b"q"}
    assert spot_check(_tuple(vendor, BIG, b"q"), BIG.model_id, specs, da) is SpotResult.PASS
    forged = _tuple(vendor, BIG, b"q", eid="f", serves=SMALL, compromised=True,
                    forged=measure_enclave(BIG.model_id, "v1"))
    assert spot_check(forged, BIG.model_id, specs, da) is SpotResult.FAIL
    honest = _tuple(vendor, BIG, b"q")
    swapped = honest.__class__(**{**honest.__dict__, "response": b"other"})
    assert spot_check(swapped, BIG.model_id, specs, da) is SpotResult.FAIL
    with pytest.raises(MissingQueryData):
        spot_check(honest, BIG.model_id, specs, {})


# -- verifier -----------------------------------------------------------------

def _verifier(registry, root, specs, rho, stake=1e6, **kw):
    ledger = StakeLedger({"s": stake, "fish": 1000.0})
    v = Verifier(registry, root, ledger, specs, b"vrf", SecurityParams(rho=rho, **kw))
    v.publish(b"q")
    return v


def _batch(tup, i=0, n=1, model=BIG.model_id):
    return Batch(f"b{i}", (tup,) * n, i, "s", 1e6, model)


@pytest.mark.parametrize("rho,mode", [(0.0, Mode.OPTIMISTIC), (1.0, Mode.SPOT_CHECK)])
def test_rho_boundaries(vendor, root, registry, specs, rho, mode):
    v = _verifier(registry, root, specs, rho)
    tup = _tuple(vendor, BIG, b"q")
    for i in range(50):
        assert v.process_batch(_batch(tup, i), 0.0, bytes([i])).mode is mode


def test_spot_check_failure_slashes_whole_batch(vendor, root, registry, specs):
    v = _verifier(registry, root, specs, 1.0)
    forged = _tuple(vendor, BIG, b"q", eid="f", serves=SMALL, compromised=True,
                    forged=measure_enclave(BIG.model_id, "v1"))
    out = v.process_batch(_batch(forged, n=4), 0.0, b"xi")
    assert out.status is Status.SLASHED
    assert v.ledger.balance("s") == 1e6 - 4 * 90.0


def test_rejected_batch(vendor, root, registry, specs):
    v = _verifier(registry, root, specs, 0.0)
    small = _tuple(vendor, SMALL, b"q", eid="t8")
    out = v.process_batch(_batch(small, model=BIG.model_id), 0.0, b"xi")
    assert out.status is Status.REJECTED and out.poea is PoEAStatus.REJECT_UNREGISTERED


def test_window_lifecycle(vendor, root, registry, specs):
    v = _verifier(registry, root, specs, 0.0, t_chal=100.0)
    out = v.process_batch(_batch(_tuple(vendor, BIG, b"q")), 5.0, b"xi")
    assert out.status is Status.PROVISIONALLY_FINAL and out.window_closes_at == 105.0
    with pytest.raises(ValueError):
        v.expire_window("b0", 50.0)
    assert v.expire_window("b0", 105.0).status is Status.HARD_FINAL
    with pytest.raises(WindowClosed):
        v.open_fraud_proof("b0", 0, "fish", b"a" * 32, b"b" * 32, 106.0)


def test_insufficient_stake(vendor, root, registry, specs):
    v = _verifier(registry, root, specs, 0.0, stake=10.0)
    with pytest.raises(InsufficientStake):
        v.process_batch(_batch(_tuple(vendor, BIG, b"q")), 0.0, b"xi")


def test_spot_check_frequency_and_index_uniformity(vendor, root, registry, specs):
    # binomial oracle; the full 10^5-batch version lives in the acceptance suite
    n, rho, batches = 8, 0.05, 20_000
    hits = np.zeros(n)
    for h in range(batches):
        value, proof = vrf_eval(b"vrf", b"xi", h)
        if value < rho:
            hits[vrf_index(proof, n)] += 1
    k = hits.sum()
    assert abs(k - rho * batches) <= 3 * math.sqrt(batches * rho * (1 - rho))
    sd = math.sqrt(k * (1 / n) * (1 - 1 / n))
    assert (np.abs(hits - k / n) <= 3 * sd).all()


# -- ledger -------------------------------------------------------------------

def test_slash_rules():
    led = StakeLedger({"a": 100.0})
    ev = led.slash("a", 100.0, "x", offense="b1")
    assert led.balance("a") == 0 and ev.amount == 100.0 and len(led.slash_events) == 1
    with pytest.raises(AlreadySlashed):
        led.slash("a", 1.0, "x", offense="b1")
    led2 = StakeLedger({"a": 50.0})
    ev = led2.slash("a", 100.0, "x", offense="b1")
    assert led2.balance("a") == 0 and ev.shortfall == 50.0 and ev.amount == 50.0


@settings(max_examples=100)
@given(ops=st.lists(st.tuples(st.sampled_from("abc"), st.floats(0, 200), st.integers(0, 3)), max_size=30))
def test_conservation(ops):
    led = StakeLedger({"a": 100.0, "b": 50.0, "c": 10.0})
    start = led.total()
    for i, (who, amount, kind) in enumerate(ops):
        if kind == 0:
            led.slash(who, amount, "fuzz", offense=i)
        elif kind == 1:
            led.pay_from_pool(who, amount)
        elif kind == 2 and led.balance(who) >= amount:
            led.escrow(i, who, amount)
        elif led.escrowed:
            led.release(next(iter(led.escrowed)), to=who)
        assert min(led.balances.values()) >= 0
        assert math.isclose(led.total(), start, abs_tol=1e-9)
