import pytest

from src.exceptions import ChannelCompromised, ConfigError
from src.services.channel_service import (
    AdversaryKind,
    AdversaryModel,
    QuantumChannel,
    decoy_count,
    intercept_resend,
    prepare_decoy,
    transmit_with_decoys,
)
from src.services.qdpos_voting import CatStateSpec, prepare_cat_state
from src.services.qudit_state import MeasurementBasis, layout_of, measure, new_basis_state

EAVESDROPPER = AdversaryModel(kind=AdversaryKind.INTERCEPT_RESEND)


def test_decoy_count():
    assert decoy_count(0.5, 8) == 8
    assert decoy_count(0.2, 8) == 2
    assert decoy_count(0.01, 3) == 1


def test_channel_rejects_bad_rates():
    with pytest.raises(ConfigError):
        QuantumChannel('a', 'b', decoy_rate=1.0)
    with pytest.raises(ConfigError):
        QuantumChannel('a', 'b', decoy_rate=0.5, threshold=1.5)


@pytest.mark.parametrize("basis", list(MeasurementBasis))
def test_decoy_measured_in_its_basis_is_certain(basis, rng):
    decoy = prepare_decoy(4, basis, 3)
    for _ in range(10):
        outcome, _ = measure(decoy, [0], basis, rng)
        assert outcome == [3]


def test_honest_channel_delivers_states_unchanged(rng):
    states = [prepare_cat_state(CatStateSpec(3, 3, (0, 1, 2))) for _ in range(4)]
    channel = QuantumChannel('C1', 'voters', decoy_rate=0.5)
    delivered, report = transmit_with_decoys(channel, states, rng)
    assert len(delivered) == 4
    assert all(a.allclose(b) for a, b in zip(delivered, states))
    assert report.error_rate == 0.0
    assert len(report.decoys) == 4


def test_intercept_resend_is_caught(rng):
    states = [new_basis_state(layout_of(4), [1]) for _ in range(8)]
    channel = QuantumChannel('C1', 'voters', decoy_rate=0.8, adversary=EAVESDROPPER)
    assert channel.intercepted
    with pytest.raises(ChannelCompromised) as excinfo:
        transmit_with_decoys(channel, states, rng)
    assert excinfo.value.reason == 'ChannelCompromised'
    assert excinfo.value.report.error_rate > 0.05


def test_intercept_resend_collapses_entanglement(rng):
    state = prepare_cat_state(CatStateSpec(2, 4, (0, 0)))
    resent = intercept_resend(state, rng)
    assert state.fidelity(resent) < 0.5


def test_transmitter_callable(rng):
    channel = QuantumChannel('C1', 'voters', decoy_rate=0.5)
    send = channel.transmitter(rng)
    states = [new_basis_state(layout_of(2), [0])]
    assert send(states)[0].allclose(states[0])


def test_adversary_controls_only_its_node():
    forger = AdversaryModel(kind='vote_forger', node_id='V1', mode='over_weight')
    assert forger.kind is AdversaryKind.VOTE_FORGER
    assert forger.controls('V1')
    assert not forger.controls('V2')
    assert not AdversaryModel().controls('V1')


def test_report_to_dict_lists_failures(rng):
    states = [new_basis_state(layout_of(4), [0]) for _ in range(20)]
    channel = QuantumChannel('C1', 'voters', decoy_rate=0.5, threshold=1.0, adversary=EAVESDROPPER)
    _, report = transmit_with_decoys(channel, states, rng)
    data = report.to_dict()
    assert len(data['decoys']) == 20
    assert data['failed_decoys'] == [c.position for c in report.decoys if not c.passed]
    assert 0.0 <= data['error_rate'] <= 1.0


@pytest.mark.slow
def test_more_decoys_catch_more_eavesdroppers(rng):
    states = [new_basis_state(layout_of(4), [2]) for _ in range(4)]
    rates = []
    for decoy_rate in (0.2, 0.5, 0.8):
        channel = QuantumChannel('C1', 'voters', decoy_rate=decoy_rate, threshold=0.1, adversary=EAVESDROPPER)
        aborted = 0
        for _ in range(500):
            try:
                transmit_with_decoys(channel, states, rng)
            except ChannelCompromised:
                aborted += 1
        rates.append(aborted / 500)
    assert [decoy_count(r, 4) for r in (0.2, 0.5, 0.8)] == [1, 4, 16]
    assert rates[0] < rates[1] < rates[2]
    assert rates[2] > 0.95
