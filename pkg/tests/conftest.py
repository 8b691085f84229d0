import random

import pytest

from autopass import vault as vault_mod

# Fast parameters for tests; the derivation pipeline is parameter-agnostic
# and the defaults (100k/100k) are exercised in the stretch-oracle check.
FAST_KDF_ITERATIONS = 200
FAST_INNER_ITERATIONS = 25


def make_vault(password="correct horse", seed=None, **kwargs):
    if seed is not None:
        rng = random.Random(seed)
        kwargs.setdefault("rand", lambda n: rng.randbytes(n))
    kwargs.setdefault("kdf_iterations", FAST_KDF_ITERATIONS)
    kwargs.setdefault("inner_iterations", FAST_INNER_ITERATIONS)
    return vault_mod.init_vault(password, **kwargs)


@pytest.fixture
def fast_vault():
    return make_vault()


@pytest.fixture
def home(tmp_path, monkeypatch):
    monkeypatch.setenv("AUTOPASS_HOME", str(tmp_path / "home"))
    monkeypatch.delenv("AUTOPASS_SERVER_URL", raising=False)
    monkeypatch.delenv("AUTOPASS_SERVER_PUBKEY", raising=False)
    monkeypatch.delenv("AUTOPASS_CLIPBOARD_FILE", raising=False)
    return tmp_path / "home"
