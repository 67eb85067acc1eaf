import pytest
from hypothesis import given, settings, strategies as st

from otrlab.attest import (
    ForgeryNotPermitted,
    QuoteStatus,
    Vendor,
    generate_quote,
    make_nonce,
    measure_enclave,
    verify_quote,
)
from otrlab.hashing import H, digest

digests = st.binary(min_size=32, max_size=32)
nonces = st.binary(min_size=16, max_size=16)


def _quote(vendor, response=b"hello", compromised=False, forged=None, eid="e1", model="llama3-70b"):
    enc = vendor.provision(eid, model, "v1", compromised=compromised)
    return enc, generate_quote(enc, H(b"q"), response, make_nonce(0.0, 1), "s", forged_mrenclave=forged)


def test_measure_is_deterministic_and_version_sensitive():
    assert measure_enclave("M", "v1") == measure_enclave("M", "v1")
    assert measure_enclave("M", "v1") != measure_enclave("M", "v2")
    assert len(measure_enclave("M", "v1")) == 32


def test_digest_is_length_prefixed():
    # ("ab", "c") and ("a", "bc") must not collide
    assert digest(b"t", b"ab", b"c") != digest(b"t", b"a", b"bc")


def test_default_registry_holds_70b_measurement(registry):
    assert registry.owner_of(measure_enclave("llama3-70b", "v1")) == "llama3-70b"


def test_honest_quote_valid(vendor, root):
    _, tup = _quote(vendor)
    assert verify_quote(tup, root) is QuoteStatus.VALID
    assert tup.is_self_consistent()


def test_compromised_enclave_forges_valid_quote(vendor, root):
    big = measure_enclave("llama3-70b", "v1")
    enc, tup = _quote(vendor, compromised=True, forged=big, model="llama3-8b", eid="bad")
    assert enc.mrenclave != big
    assert tup.mrenclave == big
    assert verify_quote(tup, root) is QuoteStatus.VALID


def test_intact_enclave_refuses_forgery(vendor):
    with pytest.raises(ForgeryNotPermitted):
        _quote(vendor, forged=measure_enclave("x", "v1"))


def test_tampered_response_hash_breaks_signature(vendor, root):
    _, tup = _quote(vendor)
    flipped = bytes([tup.response_hash[0] ^ 1]) + tup.response_hash[1:]
    bad = tup.__class__(**{**tup.__dict__, "response_hash": flipped})
    assert verify_quote(bad, root) is QuoteStatus.INVALID_SIGNATURE


def test_unknown_vendor(vendor):
    _, tup = _quote(Vendor(b"someone-else"))
    assert verify_quote(tup, vendor.root_of_trust()) is QuoteStatus.UNKNOWN_VENDOR


def test_revoked(vendor):
    _, tup = _quote(vendor, eid="rev")
    assert verify_quote(tup, vendor.root_of_trust().revoke("rev")) is QuoteStatus.REVOKED


def test_nonce_is_replayable():
    assert make_nonce(1.5, 7) == make_nonce(1.5, 7)
    assert make_nonce(1.5, 7) != make_nonce(1.5, 8)
    assert len(make_nonce(0.0, 0)) == 16


@settings(max_examples=60, deadline=None)
@given(qh=digests, response=st.binary(max_size=64), nonce=nonces, eid=st.text(min_size=1, max_size=8))
def test_round_trip(vendor, root, qh, response, nonce, eid):
    enc = vendor.provision(eid, "m", "v1")
    assert verify_quote(generate_quote(enc, qh, response, nonce), root) is QuoteStatus.VALID


@settings(max_examples=60, deadline=None)
@given(qh=digests, nonce=nonces, field=st.sampled_from(["query_hash", "response_hash", "nonce", "mrenclave"]),
       pos=st.integers(0, 15))
def test_binding(vendor, root, qh, nonce, field, pos):
    enc = vendor.provision("bind", "m", "v1")
    tup = generate_quote(enc, qh, b"r", nonce)
    value = getattr(tup, field)
    mutated = value[:pos] + bytes([value[pos] ^ 0x80]) + value[pos + 1:]
    bad = tup.__class__(**{**tup.__dict__, field: mutated})
    assert verify_quote(bad, root) is not QuoteStatus.VALID


@settings(max_examples=40, deadline=None)
@given(qh=digests, nonce=nonces, junk=st.binary(min_size=64, max_size=64))
def test_forgery_without_chained_key_fails(vendor, root, qh, nonce, junk):
    enc = vendor.provision("victim", "m", "v1")
    tup = generate_quote(enc, qh, b"r", nonce)
    assert verify_quote(tup.__class__(**{**tup.__dict__, "signature": junk}), root) is not QuoteStatus.VALID
    rogue = Vendor(junk).provision("victim", "m", "v1")
    assert verify_quote(generate_quote(rogue, qh, b"r", nonce), root) is QuoteStatus.UNKNOWN_VENDOR


def test_equal_signatures_imply_equal_bodies(vendor):
    enc = vendor.provision("nr", "m", "v1")
    seen = {}
    for i in range(200):
        tup = generate_quote(enc, H(bytes([i % 50])), bytes([i % 50]), make_nonce(0.0, i % 50))
        body = (tup.query_hash, tup.response_hash, tup.nonce)
        assert seen.setdefault(tup.signature, body) == body
    assert len(seen) == 50
