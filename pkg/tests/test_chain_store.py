import json

import numpy as np
import pytest

from src.exceptions import StoreError
from src.services.block_chain import TamperKind, Transaction, build_block, tamper_block
from src.services.chain_store import ChainStore, block_filename, build_synthetic_chain
from tests.conftest import assert_matches_schema


def test_block_filename():
    assert block_filename(7) == 'block_000007.json'


def test_synthetic_chain_is_stored_and_verifies(honest_store):
    assert len(honest_store) == 3
    assert [b.index for b in honest_store.load_blocks()] == [0, 1, 2]
    assert honest_store.verify().accepted


def test_stored_blocks_match_schema(honest_store):
    with open(honest_store.storage_dir / block_filename(0), 'r', encoding='utf-8') as f:
        assert_matches_schema('block', json.load(f))


def test_tip_hash_is_recomputed(honest_store, chain_params):
    tip = honest_store.load_block(2)
    assert honest_store.tip_hash() == tip.header.own_hash


def test_empty_store_tip_is_genesis(tmp_path, chain_params):
    store = ChainStore(tmp_path / 'empty', chain_params)
    assert len(store) == 0
    assert store.tip_hash() == chain_params.genesis_hash()


def test_append_rejects_bad_linkage(honest_store, chain_params):
    tx = honest_store.load_block(0).body.transactions
    stale = build_block(chain_params.genesis_hash(), tx, 99_000, chain_params, index=3)
    report = honest_store.append_block(stale)
    assert not report.accepted
    assert len(honest_store) == 3


def test_append_rejects_wrong_index(honest_store, chain_params):
    tx = honest_store.load_block(0).body.transactions
    block = build_block(honest_store.tip_hash(), tx, 99_000, chain_params, index=5)
    report = honest_store.append_block(block)
    assert not report.linkage_ok
    assert len(honest_store) == 3


def test_append_accepts_next_block(honest_store, chain_params):
    tx = [Transaction('node-9', 'node-1', b'extra', timestamp=99_000)]
    block = build_block(honest_store.tip_hash(), tx, 99_000, chain_params, index=3)
    assert honest_store.append_block(block).accepted
    assert len(honest_store) == 4


def test_tampered_file_fails_verification(honest_store, rng):
    block = honest_store.load_block(1)
    honest_store.write_block(tamper_block(block, TamperKind.TX_BYTE, rng))
    report = honest_store.verify()
    assert not report.accepted
    assert report.first_failure == 1


def test_missing_and_corrupt_blocks(honest_store, tmp_path, chain_params):
    with pytest.raises(StoreError):
        honest_store.load_block(10)

    (honest_store.storage_dir / block_filename(1)).write_text('{not json', encoding='utf-8')
    with pytest.raises(StoreError):
        honest_store.load_blocks()

    with pytest.raises(StoreError):
        ChainStore.open_existing(tmp_path / 'nowhere', chain_params)


def test_gap_in_chain_is_detected(honest_store):
    (honest_store.storage_dir / block_filename(1)).unlink()
    with pytest.raises(StoreError):
        honest_store.load_blocks()


def test_synthetic_chain_is_seed_deterministic(tmp_path, chain_params, signatures):
    hashes = []
    for name in ('a', 'b'):
        store = ChainStore(tmp_path / name, chain_params)
        build_synthetic_chain(store, 2, 1, np.random.default_rng(3), signatures=signatures)
        hashes.append(store.tip_hash())
    assert hashes[0] == hashes[1]
