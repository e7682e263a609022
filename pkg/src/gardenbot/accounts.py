"""User accounts: plot assignment, mode preference, and credentials.

Eighteen default accounts ship with the package, one per plot, with the
observed mode split (five automated, three manual, ten hybrid). Passwords
are stored as salted PBKDF2 hashes; the demo fixture derives them from the
user id (documented in the README) so the scripted clients can log in.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .policy import Mode

_AUTOMATED = {"p05", "p07", "p09", "p10", "p17"}
_MANUAL = {"p01", "p12", "p15"}


@dataclass(frozen=True)
class Account:
    user_id: str
    display_name: str
    plot_id: str
    password_hash: str
    initial_mode: Mode


def hash_password(password: str, iterations: int = 50000,
                  salt: bytes | None = None) -> str:
    salt = salt if salt is not None else os.urandom(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)
    return f"pbkdf2${iterations}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, iter_s, salt_hex, digest_hex = stored.split("$")
        if scheme != "pbkdf2":
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode(), bytes.fromhex(salt_hex), int(iter_s)
        )
        return hmac.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


def default_password(user_id: str) -> str:
    return f"pw-{user_id}"


def default_accounts(iterations: int = 1000) -> dict[str, Account]:
    """One account per plot. Low iteration count by default: these are demo
    fixtures, and the scripted scenarios log in hundreds of times."""
    out = {}
    for i in range(1, 19):
        user_id = f"p{i:02d}"
        if user_id in _AUTOMATED:
            mode = Mode.AUTOMATED
        elif user_id in _MANUAL:
            mode = Mode.MANUAL
        else:
            mode = Mode.HYBRID
        out[user_id] = Account(
            user_id=user_id,
            display_name=f"Gardener {i}",
            plot_id=f"plot-{i:02d}",
            password_hash=hash_password(
                default_password(user_id), iterations, salt=user_id.encode()
            ),
            initial_mode=mode,
        )
    return out


def load_accounts(path: str | Path, iterations: int = 1000) -> dict[str, Account]:
    """Accounts file: list of {user_id, display_name, plot_id, mode, and
    either password (hashed at load) or password_hash}."""
    doc = yaml.safe_load(Path(path).read_text()) or []
    out = {}
    for row in doc:
        user_id = row["user_id"]
        if "password_hash" in row:
            pw_hash = row["password_hash"]
        else:
            pw_hash = hash_password(
                row.get("password", default_password(user_id)),
                iterations, salt=user_id.encode(),
            )
        out[user_id] = Account(
            user_id=user_id,
            display_name=row.get("display_name", user_id),
            plot_id=row["plot_id"],
            password_hash=pw_hash,
            initial_mode=Mode(row.get("mode", "manual")),
        )
    return out


def accounts_to_dicts(accounts: dict[str, Account]) -> list[dict[str, Any]]:
    return [
        {
            "user_id": a.user_id,
            "display_name": a.display_name,
            "plot_id": a.plot_id,
            "password_hash": a.password_hash,
            "mode": a.initial_mode.value,
        }
        for _, a in sorted(accounts.items())
    ]


def accounts_from_dicts(rows: list[dict[str, Any]]) -> dict[str, Account]:
    return {
        row["user_id"]: Account(
            user_id=row["user_id"],
            display_name=row["display_name"],
            plot_id=row["plot_id"],
            password_hash=row["password_hash"],
            initial_mode=Mode(row["mode"]),
        )
        for row in rows
    }
