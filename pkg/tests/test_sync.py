import json
import random
import threading

import pytest
import requests

from autopass import vault as vault_mod
from autopass.client import SyncClient
from autopass.errors import (
    AuthenticationFailed,
    NotFound,
    SignatureInvalid,
    Unavailable,
    VersionConflict,
)
from autopass.policy import PasswordPolicy
from autopass.server import (
    AutopassService,
    ServerStore,
    canonical_payload,
    make_server,
)
from autopass.signing import (
    SignedEnvelope,
    generate_keypair,
    sign_envelope,
    verify_envelope,
)
from autopass.vault import SiteConfig

from conftest import make_vault


@pytest.fixture
def keypair():
    return generate_keypair()


class TestSigning:
    def test_round_trip(self, keypair):
        priv, pub = keypair
        env = sign_envelope(priv, "key-1", b'{"hello":1}')
        assert verify_envelope(pub, env) == b'{"hello":1}'

    def test_payload_tamper_detected(self, keypair):
        priv, pub = keypair
        env = sign_envelope(priv, "key-1", b'{"hello":1}')
        bad = SignedEnvelope(
            payload=b'{"hello":2}',
            key_id=env.key_id,
            timestamp=env.timestamp,
            signature=env.signature,
        )
        with pytest.raises(SignatureInvalid):
            verify_envelope(pub, bad)

    def test_key_id_and_timestamp_covered(self, keypair):
        priv, pub = keypair
        env = sign_envelope(priv, "key-1", b"payload")
        for bad in (
            SignedEnvelope(env.payload, "key-2", env.timestamp, env.signature),
            SignedEnvelope(env.payload, env.key_id, env.timestamp + 1, env.signature),
        ):
            with pytest.raises(SignatureInvalid):
                verify_envelope(pub, bad)

    def test_wrong_key_rejected(self, keypair):
        priv, _ = keypair
        _, other_pub = generate_keypair()
        env = sign_envelope(priv, "key-1", b"payload")
        with pytest.raises(SignatureInvalid):
            verify_envelope(other_pub, env)

    def test_json_round_trip(self, keypair):
        priv, pub = keypair
        env = sign_envelope(priv, "key-1", b"payload")
        again = SignedEnvelope.from_json(json.loads(json.dumps(env.to_json())))
        assert verify_envelope(pub, again) == b"payload"

    def test_single_bit_flips_all_rejected(self, keypair):
        priv, pub = keypair
        env = sign_envelope(priv, "key-1", b"some signed payload")
        payload = bytearray(env.payload)
        rng = random.Random(0)
        for _ in range(200):
            i = rng.randrange(len(payload))
            bit = 1 << rng.randrange(8)
            mutated = bytearray(payload)
            mutated[i] ^= bit
            bad = SignedEnvelope(bytes(mutated), env.key_id, env.timestamp, env.signature)
            with pytest.raises(SignatureInvalid):
                verify_envelope(pub, bad)


@pytest.fixture
def live_server(keypair):
    priv, pub = keypair
    store = ServerStore()
    store.register_user("alice", "alice-secret")
    store.register_user("bob", "bob-secret")
    store.set_policy(
        "example.com",
        PasswordPolicy(
            length_min=10,
            length_max=10,
            allowed_classes=frozenset({"lower", "upper", "digit"}),
            required_classes=frozenset({"digit"}),
        ),
    )
    service = AutopassService(store, priv)
    server = make_server(service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    yield url, pub, store
    server.shutdown()
    server.server_close()


class TestEndpoints:
    def test_policy_fetch_verifies(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        vault = make_vault()
        policy = client.fetch_policy(vault, "example.com")
        assert policy.length_min == 10
        assert "example.com" in vault.policy_cache

    def test_unknown_domain_404(self, live_server):
        url, pub, _ = live_server
        with pytest.raises(NotFound):
            SyncClient(url, pub).fetch_policy(make_vault(), "nowhere.invalid")

    def test_tampered_envelope_rejected_by_client(self, live_server):
        url, pub, _ = live_server
        resp = requests.get(f"{url}/v1/policies/example.com", timeout=5)
        env = resp.json()
        import base64

        payload = bytearray(base64.b64decode(env["payload"]))
        payload[3] ^= 0x40
        env["payload"] = base64.b64encode(bytes(payload)).decode()
        client = SyncClient(url, pub)
        with pytest.raises(SignatureInvalid):
            client._verified_payload(env)

    def test_login_and_token(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        token = client.login("alice", "alice-secret")
        assert token
        record = client._fetch_user_record("alice")
        assert record["record_version"] == 0

    def test_bad_credentials_401(self, live_server):
        url, pub, _ = live_server
        with pytest.raises(AuthenticationFailed):
            SyncClient(url, pub).login("alice", "wrong")

    def test_other_users_token_403(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        client.login("bob", "bob-secret")
        with pytest.raises(AuthenticationFailed):
            client._fetch_user_record("alice")

    def test_missing_token_401(self, live_server):
        url, pub, _ = live_server
        with pytest.raises(AuthenticationFailed):
            SyncClient(url, pub)._fetch_user_record("alice")

    def test_expired_token_401(self, keypair):
        priv, pub = keypair
        clock = [1000.0]
        store = ServerStore(clock=lambda: clock[0])
        store.register_user("alice", "s")
        service = AutopassService(store, priv)
        server = make_server(service)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_address[1]}"
            client = SyncClient(url, pub)
            client.login("alice", "s")
            client._fetch_user_record("alice")
            clock[0] += 31 * 24 * 3600
            with pytest.raises(AuthenticationFailed):
                client._fetch_user_record("alice")
        finally:
            server.shutdown()
            server.server_close()

    def test_cas_success_and_conflict(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        client.login("alice", "alice-secret")
        vault = make_vault()
        vault_mod.upsert_site(vault, SiteConfig(site_key="a.com"))
        client.sync_push(vault, "alice")
        assert vault.sync_record_version == 1

        # stale writer hits 409 before the pull-merge retry path
        stale = make_vault()
        stale_client = SyncClient(url, pub, token=client.token)
        vault_mod.upsert_site(stale, SiteConfig(site_key="b.com"))
        stale.sync_record_version = 0
        with pytest.raises(VersionConflict):
            stale_client._try_push(stale, "alice")


class TestClientSync:
    def test_pull_into_empty_vault(self, live_server):
        url, pub, _ = live_server
        writer = SyncClient(url, pub)
        writer.login("alice", "alice-secret")
        source = make_vault()
        vault_mod.upsert_site(source, SiteConfig(site_key="a.com"))
        vault_mod.upsert_site(source, SiteConfig(site_key="b.com"))
        writer.sync_push(source, "alice")

        reader = SyncClient(url, pub, token=writer.token)
        target = make_vault()
        reader.sync_pull(target, "alice")
        assert set(target.sites) == {"a.com", "b.com"}

    def test_push_conflict_resolved_by_pull_merge(self, live_server):
        url, pub, _ = live_server
        c1 = SyncClient(url, pub)
        c1.login("alice", "alice-secret")
        c2 = SyncClient(url, pub, token=c1.token)

        v1 = make_vault()
        vault_mod.upsert_site(v1, SiteConfig(site_key="a.com"))
        c1.sync_push(v1, "alice")

        v2 = make_vault()
        vault_mod.upsert_site(v2, SiteConfig(site_key="b.com"))
        c2.sync_push(v2, "alice")  # conflicts, pulls, retries
        assert set(v2.sites) == {"a.com", "b.com"}

    def test_merge_prefers_higher_version(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        client.login("alice", "alice-secret")
        vault = make_vault()
        vault_mod.upsert_site(vault, SiteConfig(site_key="a.com", reminder="v1"))
        vault_mod.upsert_site(vault, SiteConfig(site_key="a.com", reminder="server-v2"))
        client.sync_push(vault, "alice")

        behind = make_vault()
        vault_mod.upsert_site(behind, SiteConfig(site_key="a.com", reminder="local-v1"))
        client.sync_pull(behind, "alice")
        assert behind.sites["a.com"].reminder == "server-v2"

    def test_offline_falls_back_to_cache(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        vault = make_vault()
        client.fetch_policy(vault, "example.com")

        dead = SyncClient("http://127.0.0.1:1", pub, timeout=0.5)
        policy = dead.fetch_policy(vault, "example.com")
        assert policy.length_min == 10

    def test_offline_no_cache_unavailable(self):
        _, pub = generate_keypair()
        dead = SyncClient("http://127.0.0.1:1", pub, timeout=0.5)
        with pytest.raises(Unavailable):
            dead.fetch_policy(make_vault(), "example.com")

    def test_tampered_cache_never_silently_accepted(self, live_server):
        url, pub, _ = live_server
        client = SyncClient(url, pub)
        vault = make_vault()
        client.fetch_policy(vault, "example.com")
        vault.policy_cache["example.com"]["timestamp"] += 1
        dead = SyncClient("http://127.0.0.1:1", pub, timeout=0.5)
        with pytest.raises(SignatureInvalid):
            dead.fetch_policy(vault, "example.com")

    def test_no_secret_egress_in_user_records(self, live_server):
        url, pub, store = live_server
        client = SyncClient(url, pub)
        client.login("alice", "alice-secret")
        vault = make_vault(seed=77)
        master = vault_mod.unlock(vault, "correct horse")
        pw = vault_mod.generate_password(vault, "correct horse", "a.com")
        vault_mod.pin_password(vault, "correct horse", "a.com", pw)
        client.sync_push(vault, "alice")
        serialized = json.dumps(store.get_user_record("alice")).encode()
        assert master not in serialized
        assert b"correct horse" not in serialized

    def test_three_client_disjoint_edits_converge(self, live_server):
        url, pub, _ = live_server
        clients = []
        vaults = []
        login = SyncClient(url, pub)
        login.login("alice", "alice-secret")
        for i in range(3):
            clients.append(SyncClient(url, pub, token=login.token))
            v = make_vault()
            vault_mod.upsert_site(v, SiteConfig(site_key=f"client{i}.com"))
            vaults.append(v)
        for client, v in zip(clients, vaults):
            client.sync_push(v, "alice")
        for client, v in zip(clients, vaults):
            client.sync_pull(v, "alice")
        expected = {"client0.com", "client1.com", "client2.com"}
        for v in vaults:
            assert set(v.sites) == expected
        assert len({v.sync_record_version for v in vaults}) == 1


class TestStorePersistence:
    def test_store_survives_reload(self, tmp_path, keypair):
        path = tmp_path / "store.json"
        store = ServerStore(path)
        store.register_user("alice", "s")
        store.set_policy(
            "example.com", PasswordPolicy(length_min=8, length_max=8)
        )
        store.put_user_record("alice", {"a.com": {"x": 1}}, 0)

        again = ServerStore(path)
        assert again.users["alice"] == "s"
        assert again.get_policy_record("example.com")["record_version"] == 1
        assert again.get_user_record("alice")["record_version"] == 1

    def test_canonical_payload_stable(self):
        assert canonical_payload({"b": 1, "a": 2}) == b'{"a":2,"b":1}'
