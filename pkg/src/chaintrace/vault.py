"""Deterministic pseudonymization with escrowed re-identification.

Identity fields are replaced by keyed-hash tokens so analyses can still
join events by user. The plaintext of every token is encrypted under an
RSA-2048-OAEP public key whose private half is split with k-of-n Shamir
secret sharing; re-identification therefore needs k share holders.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
from dataclasses import dataclass, field

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from .errors import (
    InsufficientShares,
    IntegrityFailure,
    TokenCollision,
    UnknownToken,
    VaultSealed,
)
from .events import LogEvent
from .secretshare import ShamirShare, reconstruct_secret, split_secret

_VAULT_MAGIC = "chaintrace-vault"
_VAULT_VERSION = 1
_PRIMITIVE = "rsa-2048-oaep-sha256"
_TOKEN_PREFIX = "pn:"

# Which event fields carry identities, and the field class each one
# hashes under. Fields in one class share tokens for equal plaintexts.
DEFAULT_IDENTITY_FIELDS: dict[str, str] = {
    "actor": "user",
    "email_from": "email",
    "email_to": "email",
}


def _oaep() -> padding.OAEP:
    return padding.OAEP(
        mgf=padding.MGF1(algorithm=hashes.SHA256()),
        algorithm=hashes.SHA256(),
        label=None,
    )


@dataclass
class PseudonymVault:
    """Token to ciphertext mapping plus the escrow public key."""

    token_key: bytes
    public_key_pem: bytes
    k: int
    n: int
    entries: dict[str, dict[str, str]] = field(default_factory=dict)
    identity_fields: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_IDENTITY_FIELDS))
    read_only: bool = False

    # --- token derivation ---

    def _full_hash(self, field_class: str, plaintext: str) -> bytes:
        msg = field_class.encode() + b"\x00" + plaintext.encode()
        return hmac.new(self.token_key, msg, hashlib.sha256).digest()

    def token_for(self, field_class: str, plaintext: str) -> str:
        return _TOKEN_PREFIX + self._full_hash(field_class, plaintext)[:16].hex()

    # --- mutation ---

    def _register(self, field_class: str, plaintext: str) -> str:
        full = self._full_hash(field_class, plaintext)
        token = _TOKEN_PREFIX + full[:16].hex()
        existing = self.entries.get(token)
        if existing is not None:
            if existing["h"] != full.hex():
                raise TokenCollision(
                    f"token {token} already bound to a different plaintext"
                )
            return token
        if self.read_only:
            raise VaultSealed(f"vault is read-only; cannot add token {token}")
        pub = serialization.load_pem_public_key(self.public_key_pem)
        ciphertext = pub.encrypt(plaintext.encode(), _oaep())
        self.entries[token] = {
            "h": full.hex(),
            "c": base64.b64encode(ciphertext).decode(),
        }
        return token

    def pseudonymize_event(self, e: LogEvent) -> LogEvent:
        """Replace identity fields by tokens; idempotent on tokens."""
        actor = e.actor
        if "actor" in self.identity_fields and not actor.startswith(_TOKEN_PREFIX):
            actor = self._register(self.identity_fields["actor"], actor)
        attrs: dict[str, str] = {}
        for key, value in e.attributes.items():
            cls = self.identity_fields.get(key)
            if cls is not None and not value.startswith(_TOKEN_PREFIX):
                value = self._register(cls, value)
            attrs[key] = value
        return LogEvent(
            id=e.id,
            ts=e.ts,
            source_host=e.source_host,
            event_type=e.event_type,
            actor=actor,
            attributes=attrs,
        )

    # --- re-identification ---

    def reveal(self, token: str, shares: list[ShamirShare]) -> str:
        entry = self.entries.get(token)
        if entry is None:
            raise UnknownToken(token)
        if len(shares) < self.k:
            raise InsufficientShares(f"need {self.k} shares, got {len(shares)}")
        der = reconstruct_secret(shares, threshold=self.k)
        try:
            priv = serialization.load_der_private_key(der, password=None)
            plaintext = priv.decrypt(
                base64.b64decode(entry["c"]), _oaep()
            ).decode()
        except Exception as exc:  # wrong shares yield garbage key material
            raise IntegrityFailure(f"cannot decrypt entry for {token}") from exc
        if self._full_hash_matches(token, entry, plaintext):
            return plaintext
        raise IntegrityFailure(f"decrypted plaintext does not hash to {token}")

    def _full_hash_matches(self, token: str, entry: dict[str, str], plaintext: str) -> bool:
        for cls in set(self.identity_fields.values()):
            if self._full_hash(cls, plaintext).hex() == entry["h"]:
                return True
        return False

    # --- persistence ---

    def save(self, path: str) -> None:
        payload = {
            "magic": _VAULT_MAGIC,
            "version": _VAULT_VERSION,
            "primitive": _PRIMITIVE,
            "k": self.k,
            "n": self.n,
            "token_key": self.token_key.hex(),
            "public_key": self.public_key_pem.decode(),
            "identity_fields": self.identity_fields,
            "entries": self.entries,
        }
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=0, sort_keys=True)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str, read_only: bool = False) -> "PseudonymVault":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("magic") != _VAULT_MAGIC:
            raise ValueError(f"{path}: not a vault file")
        if payload.get("primitive") != _PRIMITIVE:
            raise ValueError(f"{path}: unsupported primitive {payload.get('primitive')}")
        return cls(
            token_key=bytes.fromhex(payload["token_key"]),
            public_key_pem=payload["public_key"].encode(),
            k=payload["k"],
            n=payload["n"],
            entries=payload["entries"],
            identity_fields=payload["identity_fields"],
            read_only=read_only,
        )


def create_vault(
    k: int,
    n: int,
    identity_fields: dict[str, str] | None = None,
) -> tuple[PseudonymVault, list[ShamirShare]]:
    """Generate a fresh vault and the n shares of its private key."""
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    private_der = key.private_bytes(
        encoding=serialization.Encoding.DER,
        format=serialization.PrivateFormat.PKCS8,
        encryption_algorithm=serialization.NoEncryption(),
    )
    public_pem = key.public_key().public_bytes(
        encoding=serialization.Encoding.PEM,
        format=serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    vault = PseudonymVault(
        token_key=os.urandom(32),
        public_key_pem=public_pem,
        k=k,
        n=n,
        identity_fields=dict(identity_fields or DEFAULT_IDENTITY_FIELDS),
    )
    shares = split_secret(private_der, k, n)
    return vault, shares
