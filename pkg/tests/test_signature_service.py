from dataclasses import replace

import pytest

from src.exceptions import KeyExhausted
from src.services.signature_service import SECRET_BYTES, SignatureService


@pytest.fixture
def service(chain_params):
    return SignatureService(hash_params=chain_params.hash_params, bits=16, capacity=3)


@pytest.fixture
def keypair(service, rng):
    return service.generate_keypair('alice', rng)


def test_keypair_shape(service, keypair):
    assert keypair.remaining == 3
    assert len(keypair.public_key.commitments) == 3
    assert len(keypair.public_key.commitments[0]) == 16
    assert all(len(s0) == SECRET_BYTES for s0, _ in keypair.secrets[0])


def test_signed_transaction_verifies(service, keypair):
    tx = service.sign_transaction(keypair, 'bob', b'pay 10', 1000)
    assert tx.nonce == 0
    assert len(tx.signature) == 16 * SECRET_BYTES
    assert service.verify_signature(keypair.public_key, tx)


def test_nonce_advances_and_keys_run_out(service, keypair):
    nonces = [service.sign_transaction(keypair, 'bob', b'x', i).nonce for i in range(3)]
    assert nonces == [0, 1, 2]
    assert keypair.remaining == 0
    with pytest.raises(KeyExhausted):
        service.sign_transaction(keypair, 'bob', b'x', 4)


@pytest.mark.parametrize("field,value", [
    ('payload', b'pay 99'),
    ('receiver', 'mallory'),
    ('timestamp', 1001),
])
def test_modified_transaction_fails(service, keypair, field, value):
    tx = service.sign_transaction(keypair, 'bob', b'pay 10', 1000)
    assert not service.verify_signature(keypair.public_key, replace(tx, **{field: value}))


def test_signature_from_another_key_fails(service, keypair, rng):
    other = service.generate_keypair('alice', rng)
    tx = service.sign_transaction(keypair, 'bob', b'pay 10', 1000)
    assert not service.verify_signature(other.public_key, tx)


def test_structural_rejections(service, keypair):
    tx = service.sign_transaction(keypair, 'bob', b'pay 10', 1000)
    assert not service.verify_signature(None, tx)
    assert not service.verify_signature(keypair.public_key, replace(tx, signature=b''))
    assert not service.verify_signature(keypair.public_key, replace(tx, signature=tx.signature[:-1]))
    assert not service.verify_signature(keypair.public_key, replace(tx, nonce=7))
    assert not service.verify_signature(keypair.public_key, replace(tx, sender='eve'))


@pytest.mark.slow
def test_every_payload_bit_flip_is_rejected(chain_params, rng):
    wide = SignatureService(hash_params=chain_params.hash_params, bits=64, capacity=1)
    keypair = wide.generate_keypair('alice', rng)
    payload = rng.bytes(32)
    tx = wide.sign_transaction(keypair, 'bob', payload, 1000)
    assert wide.verify_signature(keypair.public_key, tx)

    accepted = 0
    for _ in range(1000):
        mutated = bytearray(payload)
        bit = int(rng.integers(len(mutated) * 8))
        mutated[bit // 8] ^= 0x80 >> (bit % 8)
        accepted += wide.verify_signature(keypair.public_key, replace(tx, payload=bytes(mutated)))
    assert accepted == 0
