from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from src.exceptions import ConfigError, RoundFailed, SyncMismatch
from src.services.chain_store import ChainStore
from src.services.channel_service import AdversaryModel
from src.services.production_service import (
    Node,
    Role,
    RoundConfig,
    SimulatedClock,
    TransactionPool,
    approvals_needed,
    finalize_and_sync,
    quorum_reached,
    run_production_round,
)
from src.services.signature_service import SignatureService
from tests.conftest import assert_matches_schema

VALIDATORS = ('N1', 'N2', 'N3', 'N4')


@pytest.fixture
def network(tmp_path, chain_params):
    signatures = SignatureService(hash_params=chain_params.hash_params, bits=16, capacity=6)
    sender = Node('V0', keypair=signatures.generate_keypair('V0', np.random.default_rng(11)), roles={Role.VOTER})
    nodes = {'V0': sender}
    for node_id in ('R1', 'R2'):
        nodes[node_id] = Node(node_id, roles={Role.REPRESENTATIVE})
    for node_id in VALIDATORS:
        nodes[node_id] = Node(node_id, roles={Role.VALIDATOR})
    nodes['F1'] = Node('F1', roles={Role.FULL_NODE}, local_tip_hash=chain_params.genesis_hash())

    pool = TransactionPool(signatures, {'V0': sender.public_key})
    pool.submit(signatures.sign_transaction(sender.keypair, 'R1', b'transfer 5', 0))
    return {
        'nodes': nodes,
        'pool': pool,
        'signatures': signatures,
        'store': ChainStore(tmp_path / 'chain', chain_params),
        'clock': SimulatedClock(),
        'config': RoundConfig(representatives=('R1', 'R2'), validators=VALIDATORS, block_interval_ms=1000),
    }


def run(network, rng, **kwargs):
    return run_production_round(
        network['config'], network['pool'], network['store'], network['nodes'], network['clock'], rng, **kwargs,
    )


def test_approvals_needed_is_exact():
    assert approvals_needed(4, Fraction(2, 3)) == 3
    assert approvals_needed(3, Fraction(2, 3)) == 2
    assert approvals_needed(7, Fraction(1, 1)) == 7
    assert quorum_reached(3, 4, Fraction(2, 3))
    assert not quorum_reached(2, 4, Fraction(2, 3))


def test_round_config_validation():
    with pytest.raises(ConfigError):
        RoundConfig(representatives=('R1',), validators=VALIDATORS, approval_quorum=Fraction(1, 2))
    with pytest.raises(ConfigError):
        RoundConfig(representatives=(), validators=VALIDATORS)
    assert RoundConfig(representatives=('R1',), validators=VALIDATORS, approval_quorum='3/4').approvals_needed == 3


def test_honest_round_appends_block(network, rng):
    report = run(network, rng)
    assert report.accepted
    assert report.producer == 'R1'
    assert report.attempts[0].approvals == 4
    assert sorted(report.attempts[0].approving_validators) == list(VALIDATORS)
    assert len(network['store']) == 1
    assert network['clock'].now_ms == 1000
    assert_matches_schema('round_report', report.to_dict())


def test_idle_representative_times_out(network, rng):
    network['nodes']['R1'].responsive = False
    report = run(network, rng)
    assert [a.outcome for a in report.attempts] == ['timeout', 'accepted']
    assert report.attempts[1].window_start_ms == 1000
    assert report.producer == 'R2'


def test_tampering_representative_is_rejected(network, rng):
    report = run(network, rng, adversary=AdversaryModel(kind='block_tamper', node_id='R1'))
    first, second = report.attempts
    assert first.outcome == 'rejected'
    assert first.misbehaviour
    assert first.approvals == 0
    assert any('hash mismatch' in item for item in first.evidence)
    assert second.outcome == 'accepted'


def test_state_substituting_representative_is_rejected(network, rng):
    report = run(network, rng, adversary=AdversaryModel(kind='state_substitution', node_id='R1'))
    assert report.attempts[0].outcome == 'rejected'
    assert report.producer == 'R2'


def test_three_of_four_approvals_accepts(network, rng):
    network['nodes']['N4'].responsive = False
    report = run(network, rng)
    assert report.attempts[0].approvals == 3
    assert report.accepted


def test_two_of_four_approvals_rejects(network, rng):
    network['nodes']['N3'].responsive = False
    network['nodes']['N4'].responsive = False
    with pytest.raises(RoundFailed) as excinfo:
        run(network, rng)
    attempts = excinfo.value.report.attempts
    assert [a.approvals for a in attempts] == [2, 2]
    assert len(network['store']) == 0


def test_round_without_transactions_fails(network, rng):
    network['pool'].drain()
    with pytest.raises(RoundFailed):
        run(network, rng)


def test_pool_rejects_replays_and_bad_signatures(network):
    pool, signatures = network['pool'], network['signatures']
    sender = network['nodes']['V0']
    tx = signatures.sign_transaction(sender.keypair, 'R2', b'transfer 1', 10)
    assert pool.submit(tx)
    assert not pool.submit(tx)
    forged = signatures.sign_transaction(sender.keypair, 'R2', b'transfer 2', 11)
    assert not pool.submit(replace(forged, payload=b'transfer 200'))
    assert len(pool.drain()) == 2


def test_full_nodes_sync_to_accepted_block(network, rng):
    report = run(network, rng)
    block = network['store'].load_block(report.block_index)
    sync = finalize_and_sync(block, list(network['nodes'].values()), network['store'].params)
    assert sync.checked == ['F1']
    assert sync.consistent
    assert network['nodes']['F1'].local_tip_hash == block.header.own_hash


def test_diverging_full_node_raises(network, rng, chain_params):
    report = run(network, rng)
    block = network['store'].load_block(report.block_index)
    forked = Node('F2', roles={Role.FULL_NODE}, local_tip_hash=bytes([0xFF]) + bytes(63))
    with pytest.raises(SyncMismatch) as excinfo:
        finalize_and_sync(block, [network['nodes']['F1'], forked], chain_params)
    assert excinfo.value.report.divergent == ['F2']
