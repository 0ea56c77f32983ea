"""Application keys: scoped credentials, stored hashed, revocable at runtime.

Secrets are 32 random bytes hex-encoded; only their SHA-256 is kept, and
verification compares digests in constant time so a wrong id and a wrong
secret are indistinguishable to the caller.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field

from ..protocol.server import ALL_SCOPES

_DUMMY_DIGEST = hashlib.sha256(b"missing-key").hexdigest()


def _digest(secret: str) -> str:
    return hashlib.sha256(secret.encode("utf-8")).hexdigest()


@dataclass
class AppKey:
    key_id: str
    secret_sha256: str
    scopes: frozenset[str]
    revoked: bool = False


@dataclass
class KeyStore:
    keys: dict[str, AppKey] = field(default_factory=dict)

    def add(self, key_id: str, scopes, secret: str | None = None) -> str:
        scopes = frozenset(scopes)
        unknown = scopes - ALL_SCOPES
        if unknown:
            raise ValueError(f"unknown scopes: {sorted(unknown)}")
        if secret is None:
            secret = secrets.token_hex(32)
        self.keys[key_id] = AppKey(key_id, _digest(secret), scopes)
        return secret

    def add_hashed(self, key_id: str, secret_sha256: str, scopes):
        self.keys[key_id] = AppKey(key_id, secret_sha256, frozenset(scopes))

    def revoke(self, key_id: str) -> bool:
        key = self.keys.get(key_id)
        if key is None:
            return False
        key.revoked = True
        return True

    def verify(self, key_id: str, secret: str) -> tuple[bool, frozenset[str] | str]:
        """(True, scopes) or (False, "BadKey" | "Revoked")."""
        key = self.keys.get(key_id)
        expected = key.secret_sha256 if key else _DUMMY_DIGEST
        match = hmac.compare_digest(expected, _digest(secret))
        if key is None or not match:
            return False, "BadKey"
        if key.revoked:
            return False, "Revoked"
        return True, key.scopes

    def config_lines(self) -> list[str]:
        out = []
        for key in self.keys.values():
            if key.revoked:
                continue
            out.append(
                f"key.{key.key_id} = sha256:{key.secret_sha256}:"
                + ",".join(sorted(key.scopes))
            )
        return out

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> "KeyStore":
        store = cls()
        for k, v in pairs:
            if not k.startswith("key."):
                continue
            key_id = k[len("key."):]
            parts = v.split(":")
            if len(parts) != 3 or parts[0] != "sha256":
                raise ValueError(f"bad key entry for {key_id!r}")
            scopes = [s for s in parts[2].split(",") if s]
            store.add_hashed(key_id, parts[1], scopes)
        return store
