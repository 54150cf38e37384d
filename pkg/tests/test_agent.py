import json
import logging
from logging.handlers import RotatingFileHandler

import numpy as np
import pytest

from src import config
from src.agent import NetworkHarness, run_directory, setup_logging
from src.exceptions import ChannelCompromised, InvalidCount, ProtocolAbort, RoundFailed
from src.services.qdpos_voting import BallotMatrix
from tests.conftest import assert_matches_schema


def pinned(reference_ballots):
    ballots, indices = {}, {}
    for candidate, entry in reference_ballots['candidates'].items():
        ballots[candidate] = BallotMatrix(candidate, np.array(entry['matrix'], dtype=np.int64), reference_ballots['dim'])
        indices[candidate] = entry['indices']
    return ballots, indices


def test_reference_scenario_parses(reference_scenario):
    assert reference_scenario['VOTERS'] == ['V0', 'V1', 'V2', 'V3']
    assert reference_scenario['VOTES'] == {'C1': [2, 1, 0, 1], 'C2': [1, 2, 2, 1]}
    assert reference_scenario['QUORUM'] == config.APPROVAL_QUORUM


def test_election_with_quantum_ballots(reference_scenario):
    result = NetworkHarness(reference_scenario, seed=3).run_election()
    assert {k: t.total for k, t in result.tallies.items()} == {'C1': 4, 'C2': 6}
    assert result.elected == ['C2']
    assert result.inclusion_failures == []
    public = result.transcript['public']
    assert public['quantized_weights'] == {'V0': 3, 'V1': 3, 'V2': 2, 'V3': 2}
    assert public['ballot_dim'] == 16
    assert_matches_schema('election_transcript', result.transcript)


def test_election_with_pinned_ballots(reference_scenario, reference_ballots):
    ballots, indices = pinned(reference_ballots)
    result = NetworkHarness(reference_scenario, seed=3).run_election(ballots=ballots, indices=indices)
    assert result.tallies['C1'].row_results == [1, 2, 1, 0]
    assert result.tallies['C2'].row_results == [2, 2, 1, 1]
    assert result.elected == ['C2']
    assert result.transcript['public']['ballot_dim'] == 4


def test_election_is_seed_deterministic(reference_scenario):
    first = NetworkHarness(reference_scenario, seed=5).run_election().transcript
    second = NetworkHarness(reference_scenario, seed=5).run_election().transcript
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)


def test_over_weight_forger_is_rejected(reference_scenario):
    scenario = dict(reference_scenario, ADVERSARY='vote_forger', ADVERSARY_NODE='V1', ADVERSARY_MODE='over_weight')
    result = NetworkHarness(scenario, seed=3).run_election()
    rejected = result.transcript['public']['rejected_votes']
    assert {entry['voter'] for entry in rejected} == {'V1'}
    assert result.inclusion_failures == []
    assert {k: t.total for k, t in result.tallies.items()} == {'C1': 3, 'C2': 4}


def counted_contributions(result):
    indices = result.transcript['audit']['indices']
    voters = list(result.transcript['public']['quantized_weights'])
    return {
        voter: sum(result.tallies[k].row_results[indices[k][l]] for k in result.tallies)
        for l, voter in enumerate(voters)
    }


def test_column_tamper_is_discarded(reference_scenario):
    scenario = dict(reference_scenario, ADVERSARY='vote_forger', ADVERSARY_NODE='V2', ADVERSARY_MODE='column_tamper')
    harness = NetworkHarness(scenario, seed=3)
    result = harness.run_election()
    assert result.inclusion_failures == ['V2']
    assert 'V2' in harness.ledger.excluded_nodes()

    weights = result.transcript['public']['quantized_weights']
    counted = counted_contributions(result)
    assert all(counted[v] <= weights[v] for v in weights)
    assert counted['V2'] == 0
    assert sum(t.total for t in result.tallies.values()) == sum(counted.values()) == 8
    assert sum(t.total for t in result.tallies.values()) <= sum(weights.values())
    assert {k: t.total for k, t in result.tallies.items()} == {'C1': 4, 'C2': 4}
    assert result.elected == ['C1']
    assert result.transcript['public']['tallies']['C2']['total'] == 4
    assert_matches_schema('election_transcript', result.transcript)


@pytest.mark.parametrize("weights", [[2.1, 2.1, 1.4, 1.4], [300, 300, 200, 200], [0.03, 0.03, 0.02, 0.02]])
def test_scaling_weights_changes_nothing(reference_scenario, weights):
    baseline = NetworkHarness(reference_scenario, seed=3).run_election().transcript['public']
    scaled = NetworkHarness(dict(reference_scenario, WEIGHTS=weights), seed=3).run_election().transcript['public']
    assert scaled['quantized_weights'] == baseline['quantized_weights'] == {'V0': 3, 'V1': 3, 'V2': 2, 'V3': 2}
    assert scaled['tallies'] == baseline['tallies']
    assert scaled['elected'] == baseline['elected'] == ['C2']


def test_intercept_resend_aborts_election(reference_scenario):
    scenario = dict(reference_scenario, ADVERSARY='intercept_resend', DECOY_RATE=0.8)
    with pytest.raises(ChannelCompromised) as excinfo:
        NetworkHarness(scenario, seed=3).run_election()
    assert excinfo.value.reason == 'ChannelCompromised'


def test_excluded_candidate_is_skipped(reference_scenario):
    harness = NetworkHarness(reference_scenario, seed=3)
    harness.ledger.flag('C2', 0, 'tampered block')
    result = harness.run_election()
    assert result.elected == ['C1']
    assert result.transcript['public']['excluded'] == ['C2']


def test_simulation_produces_rewarded_chain(reference_scenario, tmp_path):
    harness = NetworkHarness(reference_scenario, seed=4, chain_dir=tmp_path / 'chain')
    outcome = harness.simulate(tmp_path / 'out')
    summary = outcome['summary']
    assert summary['elected'] == ['C2']
    assert summary['blocks'] == 3
    assert summary['balances']['C2'] == 30
    assert all(summary['balances'][v] == 6 for v in ('N1', 'N2', 'N3', 'N4'))
    assert harness.store.verify().accepted
    assert all(report['consistent'] for report in outcome['sync'])

    for i in range(3):
        with open(tmp_path / 'out' / f"round_{i:03d}.json", 'r', encoding='utf-8') as f:
            assert_matches_schema('round_report', json.load(f))
    with open(tmp_path / 'out' / 'election_transcript.json', 'r', encoding='utf-8') as f:
        assert_matches_schema('election_transcript', json.load(f))


def test_idle_representative_loses_window(reference_scenario, tmp_path):
    scenario = dict(reference_scenario, REPRESENTATIVES=2, IDLE_NODES=['C2'])
    harness = NetworkHarness(scenario, seed=4, chain_dir=tmp_path / 'chain')
    assert sorted(harness.run_election().elected) == ['C1', 'C2']
    harness.representatives = ['C2', 'C1']
    harness.submit_transactions(2)
    report = harness.run_production_round(0)
    harness.apply_incentives(report)

    assert [a.outcome for a in report.attempts] == ['timeout', 'accepted']
    assert harness.ledger.status('C2')['consecutive_timeouts'] == 1
    assert harness.ledger.balance('C1') == config.PRODUCER_REWARD
    assert harness.nodes['C1'].reward_balance == config.PRODUCER_REWARD


def test_run_directory(tmp_path):
    assert run_directory(tmp_path, 7) == tmp_path / 'seed-7'
    assert run_directory(tmp_path).parent == tmp_path


def test_setup_logging_adds_rotating_file(tmp_path):
    root = logging.getLogger('src')
    saved = root.handlers[:]
    root.handlers.clear()
    try:
        setup_logging(tmp_path / 'logs', 'DEBUG')
        assert (tmp_path / 'logs' / 'quantum_walk_chain.log').exists()
        assert any(isinstance(h, RotatingFileHandler) for h in root.handlers)
        assert root.level == logging.DEBUG
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers[:] = saved


def test_failed_round_still_settles_and_writes(reference_scenario, tmp_path):
    scenario = dict(reference_scenario, ADVERSARY='block_tamper', ADVERSARY_NODE='C2')
    harness = NetworkHarness(scenario, seed=3, chain_dir=tmp_path / 'chain')
    with pytest.raises(RoundFailed):
        harness.simulate(tmp_path / 'out')

    assert 'C2' in harness.ledger.excluded_nodes()
    assert len(harness.store) == 0
    with open(tmp_path / 'out' / 'round_000.json', 'r', encoding='utf-8') as f:
        report = json.load(f)
    assert_matches_schema('round_report', report)
    assert report['accepted'] is False
    assert report['attempts'][0]['representative'] == 'C2'
    assert report['attempts'][0]['misbehaviour'] is True
    assert (tmp_path / 'out' / 'election_transcript.json').exists()
    assert not (tmp_path / 'out' / 'summary.json').exists()


def test_more_representatives_than_candidates(reference_scenario):
    scenario = dict(reference_scenario, REPRESENTATIVES=3)
    with pytest.raises(InvalidCount):
        NetworkHarness(scenario, seed=3).run_election()


@pytest.mark.parametrize("kind, node, mode", [
    ('none', None, None),
    ('intercept_resend', None, None),
    ('block_tamper', 'C2', None),
    ('vote_forger', 'V2', 'column_tamper'),
    ('vote_forger', 'V1', 'over_weight'),
    ('state_substitution', 'C2', None),
])
def test_no_adversary_breaks_the_chain(reference_scenario, tmp_path, kind, node, mode):
    assert kind in config.ADVERSARY_KINDS
    scenario = dict(
        reference_scenario, REPRESENTATIVES=2, ADVERSARY=kind, ADVERSARY_NODE=node, ADVERSARY_MODE=mode,
    )
    if kind == 'intercept_resend':
        scenario['DECOY_RATE'] = 0.8
    harness = NetworkHarness(scenario, seed=3, chain_dir=tmp_path / 'chain')
    try:
        outcome = harness.simulate()
    except ProtocolAbort:
        assert kind == 'intercept_resend'
        assert len(harness.store) == 0
        return

    election = outcome['election']
    weights = election.transcript['public']['quantized_weights']
    counted = counted_contributions(election)
    assert all(counted[v] <= weights[v] for v in weights)
    assert sum(t.total for t in election.tallies.values()) <= sum(weights.values())

    assert outcome['summary']['blocks'] == 3
    assert harness.store.verify().accepted
    assert all(report['consistent'] for report in outcome['sync'])
    assert harness.ledger.excluded_nodes() <= ({node} if node else set())
