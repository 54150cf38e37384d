"""Shared fixtures for the quantum-walk chain tests"""
import json

import numpy as np
import pytest
from jsonschema import Draft7Validator

from src import config
from src.services.block_chain import ChainParams
from src.services.chain_store import ChainStore, build_synthetic_chain
from src.services.qw_hash import HashParams
from src.services.signature_service import SignatureService
from src.services.walk_engine import CoinParams


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: statistical tests that take several seconds')


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def chain_params():
    return ChainParams(
        n_walkers=2,
        position_dim=16,
        step_bound=32,
        coin=CoinParams(),
        hash_params=HashParams(cycle_size=8),
    )


@pytest.fixture
def signatures(chain_params):
    return SignatureService(hash_params=chain_params.hash_params, bits=16, capacity=24)


@pytest.fixture
def honest_store(tmp_path, chain_params, signatures):
    """A three-block chain on disk"""
    store = ChainStore(tmp_path / 'chain', chain_params)
    build_synthetic_chain(store, 3, 2, np.random.default_rng(7), signatures=signatures)
    return store


@pytest.fixture
def reference_scenario():
    return config.load_scenario(config.REFERENCE_SCENARIO_FILE)


@pytest.fixture
def reference_ballots():
    with open(config.DATA_DIR / 'reference_ballots.json', 'r', encoding='utf-8') as f:
        return json.load(f)


def assert_matches_schema(name: str, data) -> None:
    with open(config.SCHEMA_DIR / f"{name}.schema.json", 'r', encoding='utf-8') as f:
        schema = json.load(f)
    errors = sorted(Draft7Validator(schema).iter_errors(data), key=lambda e: list(e.path))
    assert not errors, [f"{list(e.path)}: {e.message}" for e in errors]
