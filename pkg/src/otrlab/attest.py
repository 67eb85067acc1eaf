"""Simulated enclaves, attestation quotes and their verification.

A :class:`Vendor` plays the hardware manufacturer: it holds the root signing
key and certifies per-enclave attestation keys (one level of chaining).
Quotes are Ed25519 signatures over ``mrenclave || H(q) || H(r) || nonce``.

A *compromised* enclave models a stolen attestation key: it will sign any
report body under any claimed measurement, and those quotes still verify.
Catching that is left to spot-checks and fraud proofs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .hashing import DIGEST_SIZE, H, digest, u64

NONCE_SIZE = 16


class ForgeryNotPermitted(Exception):
    """A forged measurement was requested from an uncompromised enclave."""


class QuoteStatus(enum.Enum):
    VALID = "Valid"
    INVALID_SIGNATURE = "InvalidSignature"
    UNKNOWN_VENDOR = "UnknownVendor"
    REVOKED = "Revoked"


def measure_enclave(model_id: str, binary_version: str) -> bytes:
    """MRENCLAVE of the enclave binary built for ``(model_id, binary_version)``."""
    return digest(b"otr/mrenclave", model_id.encode(), binary_version.encode())


def make_nonce(clock: float, query_id: int) -> bytes:
    """Caller-side nonce from the simulator clock and query id (replayable)."""
    return digest(b"otr/nonce", repr(float(clock)).encode(), u64(query_id))[:NONCE_SIZE]


def _raw_public(key: Ed25519PrivateKey) -> bytes:
    return key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


@lru_cache(maxsize=4096)
def _load_public(raw: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(raw)


def _verify(raw_pub: bytes, sig: bytes, msg: bytes) -> bool:
    try:
        _load_public(raw_pub).verify(sig, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class EnclaveCert:
    """Vendor signature binding an enclave id to its attestation key."""

    enclave_id: str
    public_key: bytes
    vendor_signature: bytes

    def signed_bytes(self) -> bytes:
        return digest(b"otr/cert", self.enclave_id.encode(), self.public_key)


@lru_cache(maxsize=4096)
def _cert_chains_to(vendor_public_key: bytes, cert: EnclaveCert) -> bool:
    return _verify(vendor_public_key, cert.vendor_signature, cert.signed_bytes())


@dataclass(frozen=True)
class RootOfTrust:
    vendor_public_key: bytes
    revoked: frozenset = frozenset()

    def revoke(self, *enclave_ids: str) -> "RootOfTrust":
        return RootOfTrust(self.vendor_public_key, self.revoked | frozenset(enclave_ids))


@dataclass(frozen=True)
class EnclaveIdentity:
    enclave_id: str
    mrenclave: bytes
    signing_key: Ed25519PrivateKey = field(repr=False, compare=False)
    vendor_cert: EnclaveCert
    compromised: bool = False


class Vendor:
    """Hardware manufacturer holding the root key; keys derive from ``seed``."""

    def __init__(self, seed: bytes = b"vendor") -> None:
        self._seed = bytes(seed)
        self._key = Ed25519PrivateKey.from_private_bytes(digest(b"otr/vendor-key", self._seed))
        self.public_key = _raw_public(self._key)

    def root_of_trust(self, revoked=()) -> RootOfTrust:
        return RootOfTrust(self.public_key, frozenset(revoked))

    def provision(
        self,
        enclave_id: str,
        model_id: str,
        binary_version: str,
        compromised: bool = False,
    ) -> EnclaveIdentity:
        key = Ed25519PrivateKey.from_private_bytes(
            digest(b"otr/enclave-key", self._seed, enclave_id.encode())
        )
        pub = _raw_public(key)
        unsigned = EnclaveCert(enclave_id, pub, b"")
        cert = EnclaveCert(enclave_id, pub, self._key.sign(unsigned.signed_bytes()))
        return EnclaveIdentity(
            enclave_id=enclave_id,
            mrenclave=measure_enclave(model_id, binary_version),
            signing_key=key,
            vendor_cert=cert,
            compromised=compromised,
        )


def data_body(query_hash: bytes, response_hash: bytes, nonce: bytes) -> bytes:
    """``H(q) || H(r) || nonce``."""
    return query_hash + response_hash + nonce


def quote_message(mrenclave: bytes, body: bytes) -> bytes:
    # The measurement sits in the quote header, as in a DCAP report.
    return b"otr/quote" + mrenclave + body


@dataclass(frozen=True)
class CommitmentTuple:
    """The unit a sequencer publishes to the DA layer."""

    query_hash: bytes
    response: bytes
    response_hash: bytes
    nonce: bytes
    mrenclave: bytes
    signature: bytes
    sequencer_id: str
    cert: EnclaveCert

    @property
    def data_body(self) -> bytes:
        return data_body(self.query_hash, self.response_hash, self.nonce)

    def is_self_consistent(self) -> bool:
        return H(self.response) == self.response_hash


def sign_report(
    enclave: EnclaveIdentity,
    query_hash: bytes,
    response: bytes,
    response_hash: bytes,
    nonce: bytes,
    mrenclave: bytes,
    sequencer_id: str,
) -> CommitmentTuple:
    """Low-level signer; performs no policy checks."""
    if len(query_hash) != DIGEST_SIZE or len(response_hash) != DIGEST_SIZE:
        raise ValueError("digests must be 32 bytes")
    if len(nonce) != NONCE_SIZE:
        raise ValueError("nonce must be 16 bytes")
    sig = enclave.signing_key.sign(
        quote_message(mrenclave, data_body(query_hash, response_hash, nonce))
    )
    return CommitmentTuple(
        query_hash=query_hash,
        response=response,
        response_hash=response_hash,
        nonce=nonce,
        mrenclave=mrenclave,
        signature=sig,
        sequencer_id=sequencer_id,
        cert=enclave.vendor_cert,
    )


def generate_quote(
    enclave: EnclaveIdentity,
    query_hash: bytes,
    response: bytes,
    nonce: bytes,
    sequencer_id: str = "",
    forged_mrenclave: Optional[bytes] = None,
) -> CommitmentTuple:
    """Attest ``response`` for ``query_hash`` from inside ``enclave``.

    ``forged_mrenclave`` is only honoured by compromised enclaves; an intact
    enclave cannot claim a measurement other than its own.
    """
    mrenclave = enclave.mrenclave
    if forged_mrenclave is not None and forged_mrenclave != enclave.mrenclave:
        if not enclave.compromised:
            raise ForgeryNotPermitted(enclave.enclave_id)
        mrenclave = forged_mrenclave
    return sign_report(enclave, query_hash, response, H(response), nonce, mrenclave, sequencer_id)


def verify_quote(tup: CommitmentTuple, root: RootOfTrust) -> QuoteStatus:
    if not _cert_chains_to(root.vendor_public_key, tup.cert):
        return QuoteStatus.UNKNOWN_VENDOR
    if tup.cert.enclave_id in root.revoked:
        return QuoteStatus.REVOKED
    msg = quote_message(tup.mrenclave, tup.data_body)
    if not _verify(tup.cert.public_key, tup.signature, msg):
        return QuoteStatus.INVALID_SIGNATURE
    return QuoteStatus.VALID
