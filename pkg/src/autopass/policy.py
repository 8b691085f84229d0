"""Stage two: encode derived bits as a policy-compliant password, plus offsets.

The encoder draws characters from an expandable hash stream with rejection
sampling, so every charset index is equally likely.  Offsets are
character-wise modular shifts stored per site; they let the deterministic
pipeline land on a user-chosen password and implement rotation.
"""

from __future__ import annotations

import random
import string
import struct
from dataclasses import dataclass
from typing import Iterable

from .derivation import DEFAULT_HASH_ID, hash_function
from .errors import (
    CharOutOfCharset,
    InvalidParameter,
    LengthMismatch,
    ModulusMismatch,
    RetriesExhausted,
    UnsatisfiablePolicy,
)

# The 32 printable ASCII non-alphanumerics (codes 33..126 minus alnum).
SYMBOLS = "".join(
    chr(c) for c in range(33, 127) if not chr(c).isalnum()
)

CHARACTER_CLASSES = {
    "lower": string.ascii_lowercase,
    "upper": string.ascii_uppercase,
    "digit": string.digits,
    "symbol": SYMBOLS,
}

MAX_LENGTH = 64
ENCODE_MAX_ATTEMPTS = 32
OFFSET_MAX_RESAMPLES = 64


@dataclass(frozen=True)
class PasswordPolicy:
    length_min: int
    length_max: int
    allowed_classes: frozenset = frozenset({"lower", "upper", "digit", "symbol"})
    required_classes: frozenset = frozenset()
    forbidden_chars: frozenset = frozenset()
    policy_version: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "allowed_classes", frozenset(self.allowed_classes))
        object.__setattr__(self, "required_classes", frozenset(self.required_classes))
        object.__setattr__(self, "forbidden_chars", frozenset(self.forbidden_chars))
        if not 1 <= self.length_min <= self.length_max <= MAX_LENGTH:
            raise InvalidParameter(
                f"bad length bounds [{self.length_min}, {self.length_max}]"
            )
        unknown = self.allowed_classes - CHARACTER_CLASSES.keys()
        if unknown:
            raise InvalidParameter(f"unknown character classes: {sorted(unknown)}")
        if not self.required_classes <= self.allowed_classes:
            raise InvalidParameter("required_classes must be a subset of allowed_classes")
        if self.policy_version < 0:
            raise InvalidParameter("policy_version must be non-negative")
        for cls in self.required_classes:
            if not set(CHARACTER_CLASSES[cls]) - self.forbidden_chars:
                raise UnsatisfiablePolicy(
                    f"required class {cls!r} fully forbidden"
                )

    def to_json(self) -> dict:
        return {
            "length_min": self.length_min,
            "length_max": self.length_max,
            "allowed_classes": sorted(self.allowed_classes),
            "required_classes": sorted(self.required_classes),
            "forbidden_chars": sorted(self.forbidden_chars),
            "policy_version": self.policy_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PasswordPolicy":
        return cls(
            length_min=obj["length_min"],
            length_max=obj["length_max"],
            allowed_classes=frozenset(obj.get("allowed_classes", [])),
            required_classes=frozenset(obj.get("required_classes", [])),
            forbidden_chars=frozenset(obj.get("forbidden_chars", [])),
            policy_version=obj.get("policy_version", 0),
        )


@dataclass(frozen=True)
class Charset:
    """Ordered symbol set; a character's index is its numeric value."""

    chars: str

    def __post_init__(self) -> None:
        if list(self.chars) != sorted(set(self.chars)):
            raise InvalidParameter("charset must be sorted and duplicate-free")

    def __len__(self) -> int:
        return len(self.chars)

    def index(self, ch: str) -> int:
        i = self.chars.find(ch)
        if i < 0:
            raise CharOutOfCharset(f"character {ch!r} not in charset")
        return i


@dataclass(frozen=True)
class PasswordOffset:
    shifts: tuple
    modulus: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "shifts", tuple(self.shifts))
        if self.modulus < 1:
            raise InvalidParameter("modulus must be positive")
        if any(not 0 <= s < self.modulus for s in self.shifts):
            raise InvalidParameter("shifts must lie in [0, modulus)")

    def to_json(self) -> dict:
        return {"shifts": list(self.shifts), "modulus": self.modulus}

    @classmethod
    def from_json(cls, obj: dict) -> "PasswordOffset":
        return cls(shifts=tuple(obj["shifts"]), modulus=obj["modulus"])


def effective_charset(policy: PasswordPolicy) -> Charset:
    """Union of the allowed classes minus forbidden chars, code-point sorted."""
    chars = set()
    for cls in policy.allowed_classes:
        chars.update(CHARACTER_CLASSES[cls])
    chars -= set(policy.forbidden_chars)
    if not chars:
        raise UnsatisfiablePolicy("effective charset is empty")
    return Charset("".join(sorted(chars)))


def _byte_stream(bits: bytes, attempt_nonce: int, hash_id: str) -> Iterable[int]:
    hfun = hash_function(hash_id)
    block = 0
    while True:
        digest = hfun(
            bits + struct.pack(">I", attempt_nonce) + struct.pack(">I", block)
        ).digest()
        yield from digest
        block += 1


def _satisfies_required(password: str, policy: PasswordPolicy) -> bool:
    for cls in policy.required_classes:
        members = set(CHARACTER_CLASSES[cls]) - set(policy.forbidden_chars)
        if not members & set(password):
            return False
    return True


def encode(
    bits: bytes,
    policy: PasswordPolicy,
    attempt_nonce: int = 0,
    hash_id: str = DEFAULT_HASH_ID,
) -> str:
    """Map 32 derived bytes onto a password of length `length_min`.

    Bytes come from an expandable hash stream and are consumed with
    rejection sampling (a byte b is accepted iff b < 256 - 256 % N), so
    indices modulo the charset size N carry no modulo bias.  If a required
    class is missing the whole password is re-derived with the next
    attempt nonce, preserving per-position uniformity.
    """
    if attempt_nonce < 0:
        raise InvalidParameter("attempt_nonce must be non-negative")
    charset = effective_charset(policy)
    n = len(charset)
    limit = 256 - (256 % n)
    length = policy.length_min
    for attempt in range(attempt_nonce, attempt_nonce + ENCODE_MAX_ATTEMPTS):
        stream = _byte_stream(bits, attempt, hash_id)
        out = []
        while len(out) < length:
            b = next(stream)
            if b < limit:
                out.append(charset.chars[b % n])
        password = "".join(out)
        if _satisfies_required(password, policy):
            return password
    raise RetriesExhausted(
        f"no compliant password in {ENCODE_MAX_ATTEMPTS} attempts"
    )


def apply_offset(base: str, offset: PasswordOffset, charset: Charset) -> str:
    """out[i] = charset[(index(base[i]) + shifts[i]) mod N]."""
    if len(offset.shifts) != len(base):
        raise LengthMismatch(
            f"offset length {len(offset.shifts)} != password length {len(base)}"
        )
    if offset.modulus != len(charset):
        raise ModulusMismatch(
            f"offset modulus {offset.modulus} != charset size {len(charset)}"
        )
    n = len(charset)
    return "".join(
        charset.chars[(charset.index(c) + s) % n] for c, s in zip(base, offset.shifts)
    )


def compute_offset(base: str, desired: str, charset: Charset) -> PasswordOffset:
    """Character-wise modular difference taking `base` to `desired`."""
    if len(base) != len(desired):
        raise LengthMismatch(
            f"base length {len(base)} != desired length {len(desired)}"
        )
    n = len(charset)
    shifts = tuple(
        (charset.index(d) - charset.index(b)) % n for b, d in zip(base, desired)
    )
    return PasswordOffset(shifts=shifts, modulus=n)


def compose_offsets(first: PasswordOffset, second: PasswordOffset) -> PasswordOffset:
    """Offset equivalent to applying `first` then `second`."""
    if len(first.shifts) != len(second.shifts):
        raise LengthMismatch("offset lengths differ")
    if first.modulus != second.modulus:
        raise ModulusMismatch("offset moduli differ")
    n = first.modulus
    return PasswordOffset(
        shifts=tuple((a + b) % n for a, b in zip(first.shifts, second.shifts)),
        modulus=n,
    )


def random_offset(
    base: str, policy: PasswordPolicy, rng: random.Random
) -> PasswordOffset:
    """Uniformly random offset whose result still meets the required classes."""
    charset = effective_charset(policy)
    n = len(charset)
    for _ in range(OFFSET_MAX_RESAMPLES):
        shifts = tuple(rng.randrange(n) for _ in base)
        offset = PasswordOffset(shifts=shifts, modulus=n)
        if _satisfies_required(apply_offset(base, offset, charset), policy):
            return offset
    raise RetriesExhausted(
        f"no compliant offset in {OFFSET_MAX_RESAMPLES} resamples"
    )
