import hashlib
import random
import string
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autopass.errors import (
    CharOutOfCharset,
    LengthMismatch,
    ModulusMismatch,
    UnsatisfiablePolicy,
)
from autopass.policy import (
    CHARACTER_CLASSES,
    Charset,
    PasswordOffset,
    PasswordPolicy,
    SYMBOLS,
    apply_offset,
    compose_offsets,
    compute_offset,
    effective_charset,
    encode,
    random_offset,
)

ALNUM62 = "".join(sorted(string.digits + string.ascii_uppercase + string.ascii_lowercase))


def oracle_encode(bits: bytes, charset: str, length: int, nonce: int) -> str:
    """Reference stream consumer, written independently of encode()."""
    n = len(charset)
    limit = 256 - (256 % n)
    out = []
    block = 0
    buf = []
    while len(out) < length:
        if not buf:
            buf = list(
                hashlib.sha256(
                    bits + struct.pack(">I", nonce) + struct.pack(">I", block)
                ).digest()
            )
            block += 1
        b = buf.pop(0)
        if b < limit:
            out.append(charset[b % n])
    return "".join(out)


def make_policy(**kwargs):
    kwargs.setdefault("length_min", 8)
    kwargs.setdefault("length_max", 8)
    return PasswordPolicy(**kwargs)


class TestEffectiveCharset:
    def test_alnum_policy_gives_62_symbols(self):
        cs = effective_charset(
            make_policy(allowed_classes=frozenset({"lower", "upper", "digit"}))
        )
        assert len(cs) == 62
        assert cs.chars == ALNUM62

    def test_lower_digit_sorted_digits_first(self):
        cs = effective_charset(make_policy(allowed_classes=frozenset({"lower", "digit"})))
        assert len(cs) == 36
        assert cs.chars == string.digits + string.ascii_lowercase

    def test_forbidden_removed(self):
        cs = effective_charset(
            make_policy(allowed_classes=frozenset({"lower"}), forbidden_chars=frozenset("a"))
        )
        assert len(cs) == 25
        assert "a" not in cs.chars

    def test_symbol_class_has_32_members(self):
        assert len(SYMBOLS) == 32
        assert all(33 <= ord(c) <= 126 and not c.isalnum() for c in SYMBOLS)

    def test_all_classes_give_94(self):
        assert len(effective_charset(make_policy())) == 94

    def test_everything_forbidden_raises(self):
        with pytest.raises(UnsatisfiablePolicy):
            effective_charset(
                make_policy(
                    allowed_classes=frozenset({"digit"}),
                    forbidden_chars=frozenset(string.digits),
                )
            )


class TestEncode:
    def test_single_char_charset(self):
        policy = PasswordPolicy(
            length_min=4,
            length_max=4,
            allowed_classes=frozenset({"lower"}),
            forbidden_chars=frozenset(set(string.ascii_lowercase) - {"a"}),
        )
        assert encode(b"\x07" * 32, policy) == "aaaa"

    def test_matches_frozen_oracle_value(self):
        # Computed with oracle_encode before encode() existed.
        policy = make_policy(allowed_classes=frozenset({"lower", "upper", "digit"}))
        assert encode(b"\x00" * 32, policy) == "iqKTux7G"

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_oracle_on_random_bits(self, seed):
        bits = random.Random(seed).randbytes(32)
        policy = make_policy(
            allowed_classes=frozenset({"lower", "upper", "digit"}), length_min=10,
            length_max=10,
        )
        assert encode(bits, policy) == oracle_encode(bits, ALNUM62, 10, 0)

    def test_required_digit_with_digits_forbidden_unsatisfiable(self):
        with pytest.raises(UnsatisfiablePolicy):
            make_policy(
                allowed_classes=frozenset({"lower", "digit"}),
                required_classes=frozenset({"digit"}),
                forbidden_chars=frozenset(string.digits),
            )

    def test_required_classes_enforced(self):
        policy = make_policy(
            required_classes=frozenset({"digit", "symbol"}),
        )
        rng = random.Random(42)
        for _ in range(200):
            pw = encode(rng.randbytes(32), policy)
            assert any(c in string.digits for c in pw)
            assert any(c in SYMBOLS for c in pw)

    def test_output_length_is_length_min(self):
        policy = PasswordPolicy(length_min=10, length_max=20)
        assert len(encode(b"\xaa" * 32, policy)) == 10

    def test_deterministic_and_nonce_sensitive(self):
        policy = make_policy()
        bits = b"\x5c" * 32
        assert encode(bits, policy, 0) == encode(bits, policy, 0)
        assert encode(bits, policy, 0) != encode(bits, policy, 1)


def charset_of_size(n: int) -> Charset:
    full = ALNUM62 + SYMBOLS
    return Charset("".join(sorted(full[:n])))


class TestOffsets:
    def test_zero_offset_is_identity(self):
        cs = Charset(string.ascii_lowercase)
        off = PasswordOffset(shifts=(0, 0, 0), modulus=26)
        assert apply_offset("abc", off, cs) == "abc"

    def test_hand_computed_shift(self):
        cs = Charset(string.ascii_lowercase)
        off = PasswordOffset(shifts=(1, 2, 3), modulus=26)
        assert apply_offset("abc", off, cs) == "bdf"

    def test_wraparound(self):
        cs = Charset(string.ascii_lowercase)
        assert apply_offset("z", PasswordOffset(shifts=(1,), modulus=26), cs) == "a"

    def test_compute_offset_hand_case(self):
        cs = Charset(string.ascii_lowercase)
        off = compute_offset("abc", "bdf", cs)
        assert off.shifts == (1, 2, 3)

    def test_compute_identity_is_zero(self):
        cs = Charset(string.ascii_lowercase)
        assert compute_offset("abc", "abc", cs).shifts == (0, 0, 0)

    def test_out_of_charset_desired(self):
        cs = Charset(string.ascii_lowercase)
        with pytest.raises(CharOutOfCharset):
            compute_offset("abc", "ab!", cs)

    def test_length_mismatch(self):
        cs = Charset(string.ascii_lowercase)
        with pytest.raises(LengthMismatch):
            compute_offset("abc", "ab", cs)
        with pytest.raises(LengthMismatch):
            apply_offset("abc", PasswordOffset(shifts=(1,), modulus=26), cs)

    def test_modulus_mismatch(self):
        cs = Charset(string.ascii_lowercase)
        with pytest.raises(ModulusMismatch):
            apply_offset("abc", PasswordOffset(shifts=(1, 2, 3), modulus=25), cs)

    @settings(max_examples=300)
    @given(
        st.integers(min_value=0, max_value=93),
        st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=16),
        st.data(),
    )
    def test_round_trip_property(self, size_seed, picks, data):
        n = data.draw(st.sampled_from([2, 26, 62, 94]))
        cs = charset_of_size(n)
        base = "".join(cs.chars[p % n] for p in picks)
        desired = "".join(
            cs.chars[data.draw(st.integers(min_value=0, max_value=n - 1))] for _ in picks
        )
        off = compute_offset(base, desired, cs)
        assert apply_offset(base, off, cs) == desired

    def test_group_composition(self):
        rng = random.Random(5)
        for n in (2, 26, 62, 94):
            cs = charset_of_size(n)
            base = "".join(rng.choice(cs.chars) for _ in range(12))
            o1 = PasswordOffset(tuple(rng.randrange(n) for _ in range(12)), n)
            o2 = PasswordOffset(tuple(rng.randrange(n) for _ in range(12)), n)
            via_two = apply_offset(apply_offset(base, o1, cs), o2, cs)
            via_composed = apply_offset(base, compose_offsets(o1, o2), cs)
            assert via_two == via_composed


class TestRandomOffset:
    def test_length_matches_base(self):
        policy = make_policy()
        off = random_offset("Abcdef1!", policy, random.Random(1))
        assert len(off.shifts) == 8

    def test_seed_reproducible(self):
        policy = make_policy()
        a = random_offset("Abcdef1!", policy, random.Random(123))
        b = random_offset("Abcdef1!", policy, random.Random(123))
        assert a == b

    def test_result_satisfies_required_classes(self):
        policy = make_policy(required_classes=frozenset({"digit", "upper"}))
        cs = effective_charset(policy)
        for seed in range(50):
            off = random_offset("aaaaaaaa", policy, random.Random(seed))
            rotated = apply_offset("aaaaaaaa", off, cs)
            assert any(c in string.digits for c in rotated)
            assert any(c in string.ascii_uppercase for c in rotated)


class TestPolicyJson:
    def test_round_trip(self):
        policy = make_policy(
            allowed_classes=frozenset({"lower", "digit"}),
            required_classes=frozenset({"digit"}),
            forbidden_chars=frozenset("01"),
            policy_version=3,
        )
        assert PasswordPolicy.from_json(policy.to_json()) == policy

    def test_flat_schema_fields(self):
        obj = make_policy().to_json()
        assert set(obj) == {
            "length_min",
            "length_max",
            "allowed_classes",
            "required_classes",
            "forbidden_chars",
            "policy_version",
        }
