"""Network harness: nodes, election, block production, incentives and sync"""
import json
import logging
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src import config
from src.exceptions import OverWeight, QuantumChainError, RoundFailed
from src.services.block_chain import ChainParams
from src.services.chain_store import ChainStore
from src.services.channel_service import AdversaryKind, AdversaryModel, QuantumChannel, transmit_with_decoys
from src.services.ledger_service import IncentiveLedger
from src.services.production_service import (
    Node,
    Role,
    RoundConfig,
    RoundReport,
    SimulatedClock,
    SyncReport,
    TransactionPool,
    finalize_and_sync,
    run_production_round,
)
from src.services.qdpos_voting import (
    BallotMatrix,
    PrivacyIndexSet,
    TallySheet,
    ballot_dimension,
    build_ballot_box,
    cast_vote,
    distribute_indices,
    select_representatives,
    tally,
    verify_inclusion,
    voter_profiles,
)
from src.services.qw_hash import HashParams
from src.services.signature_service import SignatureService
from src.services.walk_engine import CoinParams

logger = logging.getLogger(__name__)

DEFAULT_TOTAL_VOTES = 10
DEFAULT_ROUNDS = 3
DEFAULT_TRANSACTIONS_PER_ROUND = 2
RNG_STREAMS = ('keys', 'election', 'channel', 'production', 'transactions')


def setup_logging(log_dir: Optional[Path] = None, level: str = config.LOG_LEVEL) -> logging.Logger:
    """Configure logging with rotation and proper formatting"""
    log_dir = Path(log_dir or config.LOG_DIR)
    log_dir.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger('src')
    root.setLevel(level)
    if root.handlers:
        return root

    handler = RotatingFileHandler(
        log_dir / 'quantum_walk_chain.log',
        maxBytes=1024 * 1024,  # 1MB
        backupCount=5
    )
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handler.setFormatter(formatter)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)

    root.addHandler(handler)
    root.addHandler(stream)
    root.info("Logging system initialized")
    return root


@dataclass
class ElectionResult:
    elected: List[str]
    tallies: Dict[str, TallySheet]
    transcript: Dict[str, Any]
    inclusion_failures: List[str] = field(default_factory=list)


class NetworkHarness:
    """Deterministic simulation of a QDPoS network driven by a scenario"""

    def __init__(
        self,
        scenario: Dict[str, Any],
        seed: Optional[int] = None,
        chain_dir: Optional[Path] = None,
    ):
        self.scenario = scenario
        self.seed = seed if seed is not None else scenario.get('SEED', 0)
        streams = np.random.SeedSequence(self.seed).spawn(len(RNG_STREAMS))
        self.rngs = {name: np.random.default_rng(s) for name, s in zip(RNG_STREAMS, streams)}

        self.params = ChainParams(
            n_walkers=scenario.get('WALKERS', config.DEFAULT_WALKERS),
            position_dim=scenario.get('POSITION_DIM', config.DEFAULT_POSITION_DIM),
            step_bound=scenario.get('STEP_BOUND', config.DEFAULT_STEP_BOUND),
            coin=CoinParams(),
            hash_params=HashParams(cycle_size=scenario.get('HASH_CYCLE', config.HASH_CYCLE_SIZE)),
        )
        self.delta = scenario.get('DELTA', config.DEFAULT_DELTA)
        self.quorum = Fraction(scenario.get('QUORUM', config.APPROVAL_QUORUM))
        self.block_interval = scenario.get('BLOCK_INTERVAL_MS', config.BLOCK_INTERVAL_MS)
        self.decoys = scenario.get('DECOYS', True)
        self.adversary = AdversaryModel(
            kind=scenario.get('ADVERSARY', 'none'),
            node_id=scenario.get('ADVERSARY_NODE'),
            mode=scenario.get('ADVERSARY_MODE'),
        )

        self.signatures = SignatureService(hash_params=self.params.hash_params)
        self.ledger = IncentiveLedger()
        self.clock = SimulatedClock()
        self.nodes: Dict[str, Node] = {}
        self._build_nodes()

        self.store = ChainStore(chain_dir or tempfile.mkdtemp(prefix='qwc-chain-'), self.params)
        self.pool = TransactionPool(
            self.signatures,
            {node.id: node.public_key for node in self.nodes.values() if node.public_key},
        )
        self.representatives: List[str] = []
        self.channel_reports: List[Dict[str, Any]] = []

    def _node(self, node_id: str) -> Node:
        if node_id not in self.nodes:
            self.nodes[node_id] = Node(id=node_id)
            self.ledger.register_node(node_id)
        return self.nodes[node_id]

    def _build_nodes(self) -> None:
        voters = self.scenario.get('VOTERS', [])
        weights = self.scenario.get('WEIGHTS', [1.0] * len(voters))
        for voter, weight in zip(voters, weights):
            node = self._node(voter)
            node.stake = float(weight)
            node.roles.add(Role.VOTER)
            node.keypair = self.signatures.generate_keypair(voter, self.rngs['keys'])

        role_keys = (('CANDIDATES', Role.CANDIDATE), ('VALIDATORS', Role.VALIDATOR), ('FULL_NODES', Role.FULL_NODE))
        for key, role in role_keys:
            for node_id in self.scenario.get(key, []):
                self._node(node_id).roles.add(role)

        for node_id in self.scenario.get('IDLE_NODES', []):
            self._node(node_id).responsive = False

        genesis = self.params.genesis_hash()
        for node in self.nodes.values():
            node.local_tip_hash = genesis
        logger.info(f"Built {len(self.nodes)} nodes for seed {self.seed}")

    def _transmitter(self, sender: str, receiver: str):
        if not self.decoys:
            return None
        channel = QuantumChannel(
            sender=sender,
            receiver=receiver,
            decoy_rate=self.scenario.get('DECOY_RATE', config.DECOY_RATE),
            threshold=self.scenario.get('DECOY_THRESHOLD', config.DECOY_ERROR_THRESHOLD),
            adversary=self.adversary if self.adversary.kind is AdversaryKind.INTERCEPT_RESEND else None,
        )
        rng = self.rngs['channel']

        def send(states):
            delivered, report = transmit_with_decoys(channel, states, rng)
            summary = report.to_dict()
            summary['decoys'] = len(report.decoys)
            self.channel_reports.append(summary)
            return delivered
        return send

    def _default_votes(self, voters: Sequence[str], candidates: Sequence[str], weights: Sequence[int]) -> Dict[str, List[int]]:
        """Each voter puts their full weight on one candidate, round robin"""
        votes = {k: [0] * len(voters) for k in candidates}
        for l, weight in enumerate(weights):
            votes[candidates[l % len(candidates)]][l] = weight
        return votes

    def run_election(
        self,
        r: Optional[int] = None,
        ballots: Optional[Dict[str, BallotMatrix]] = None,
        indices: Optional[Dict[str, Sequence[int]]] = None,
    ) -> ElectionResult:
        """Elect ``r`` representatives with the weighted quantum vote

        ``ballots`` and ``indices`` pin the ballot boxes and privacy indices
        per candidate, skipping their quantum preparation.
        """
        try:
            voters = self.scenario.get('VOTERS', [])
            excluded = self.ledger.excluded_nodes()
            candidates = [k for k in self.scenario.get('CANDIDATES', []) if k not in excluded]
            r = r or self.scenario.get('REPRESENTATIVES', 1)
            total_votes = self.scenario.get('TOTAL_VOTES', DEFAULT_TOTAL_VOTES)
            weights = self.scenario.get('WEIGHTS', [1.0] * len(voters))
            profiles = voter_profiles(voters, weights, total_votes)
            d = ballot_dimension(total_votes)
            if ballots:
                d = next(iter(ballots.values())).dim
            quantized = [p.quantized_weight for p in profiles]
            votes = self.scenario.get('VOTES') or self._default_votes(voters, candidates, quantized)
            rng = self.rngs['election']
            n = len(voters)

            public: Dict[str, Any] = {
                'candidates': candidates,
                'excluded': sorted(excluded),
                'total_votes': total_votes,
                'ballot_dim': d,
                'quantized_weights': {p.id: p.quantized_weight for p in profiles},
                'ballots': {},
                'tallies': {},
                'rejected_votes': [],
                'inclusion_failures': [],
            }
            audit: Dict[str, Any] = {'indices': {}, 'checked_groups': {}, 'votes': {}, 'inclusion': {}}

            index_sets: Dict[str, PrivacyIndexSet] = {}
            tallies: Dict[str, TallySheet] = {}
            cast_totals = [0] * n
            forger = self.adversary if self.adversary.kind is AdversaryKind.VOTE_FORGER else None

            for k in candidates:
                if indices and k in indices:
                    index_sets[k] = PrivacyIndexSet(candidate=k, indices=tuple(indices[k]))
                else:
                    index_sets[k] = distribute_indices(
                        k, n, self.delta, rng, transmit=self._transmitter(k, 'voters'),
                    )
                if ballots and k in ballots:
                    matrix = ballots[k]
                else:
                    matrix = build_ballot_box(k, n, d, self.delta, rng, transmit=self._transmitter(k, 'voters'))

                candidate_votes = list(votes.get(k, [0] * n))
                for l, profile in enumerate(profiles):
                    vote = candidate_votes[l]
                    if forger and forger.node_id == profile.id and forger.mode == 'over_weight':
                        vote = profile.quantized_weight + 1
                    try:
                        column = cast_vote(matrix.column(l), index_sets[k].indices[l], vote, d, profile.quantized_weight)
                        if cast_totals[l] + vote > profile.quantized_weight:
                            raise OverWeight(
                                f"{profile.id} would cast {cast_totals[l] + vote} votes "
                                f"with weight {profile.quantized_weight}"
                            )
                    except OverWeight as e:
                        logger.warning(f"Rejected vote from {profile.id} for {k}: {e}")
                        public['rejected_votes'].append({'voter': profile.id, 'candidate': k, 'reason': str(e)})
                        candidate_votes[l] = 0
                        continue
                    if forger and forger.node_id == profile.id and forger.mode == 'column_tamper':
                        row = index_sets[k].indices[l]
                        column[row] = (column[row] + 1) % d
                        logger.warning(f"Voter {profile.id} tampered with its published column for {k}")
                    matrix = matrix.with_column(l, column)
                    cast_totals[l] += vote

                tallies[k] = tally(matrix, d)
                public['ballots'][k] = matrix.entries.tolist()
                public['tallies'][k] = tallies[k].to_dict()
                audit['indices'][k] = list(index_sets[k].indices)
                audit['checked_groups'][k] = list(index_sets[k].checked_groups)
                audit['votes'][k] = candidate_votes

            inclusion_failures = []
            for l, profile in enumerate(profiles):
                voter_indices = {k: index_sets[k].indices[l] for k in candidates}
                included = verify_inclusion(profile, voter_indices, tallies, cast_total=cast_totals[l])
                audit['inclusion'][profile.id] = included
                if not included:
                    inclusion_failures.append(profile.id)
                    self.ledger.flag(profile.id, len(self.store), 'published column does not match the tally')
            public['inclusion_failures'] = inclusion_failures

            # each privacy index names one voter's row
            for voter_id in inclusion_failures:
                l = voters.index(voter_id)
                for k in candidates:
                    rows = list(tallies[k].row_results)
                    rows[index_sets[k].indices[l]] = 0
                    tallies[k] = TallySheet(candidate=k, row_results=rows, dim=tallies[k].dim)
                    public['tallies'][k] = tallies[k].to_dict()
                logger.warning(f"Discarded the rows of voter {voter_id} before selection")

            elected = select_representatives(list(tallies.values()), r, rng=rng)
            public['elected'] = elected
            audit['channels'] = list(self.channel_reports)
            self.representatives = elected
            for k in elected:
                self._node(k).roles.add(Role.REPRESENTATIVE)

            logger.info(
                f"Election finished: {', '.join(f'{k}={t.total}' for k, t in tallies.items())}; elected {elected}"
            )
            return ElectionResult(
                elected=elected,
                tallies=tallies,
                transcript={'seed': self.seed, 'public': public, 'audit': audit},
                inclusion_failures=inclusion_failures,
            )
        except QuantumChainError as e:
            logger.error(f"Election failed: {e}")
            raise

    def submit_transactions(self, count: int) -> int:
        """Sign ``count`` synthetic transfers from voters, round robin"""
        voters = [n for n in self.nodes.values() if n.keypair]
        if not voters:
            return 0
        rng = self.rngs['transactions']
        accepted = 0
        for i in range(count):
            sender = voters[i % len(voters)]
            receiver = voters[(i + 1) % len(voters)].id
            amount = int(rng.integers(1, 100))
            tx = self.signatures.sign_transaction(
                sender.keypair, receiver, f"transfer {amount}".encode('utf-8'), self.clock.now_ms,
            )
            if self.pool.submit(tx):
                accepted += 1
        return accepted

    def run_production_round(self, round_index: int) -> RoundReport:
        try:
            round_config = RoundConfig(
                representatives=tuple(self.representatives),
                validators=tuple(self.scenario.get('VALIDATORS', [])),
                block_interval_ms=self.block_interval,
                approval_quorum=self.quorum,
            )
            return run_production_round(
                round_config,
                self.pool,
                self.store,
                self.nodes,
                self.clock,
                self.rngs['production'],
                round_index=round_index,
                adversary=self.adversary,
                delta=self.delta,
            )
        except QuantumChainError as e:
            logger.error(f"Production round {round_index} failed: {e}")
            raise

    def apply_incentives(self, report: RoundReport) -> Dict[str, int]:
        balances = self.ledger.apply_round(report)
        for node_id, balance in balances.items():
            self._node(node_id).reward_balance = balance
        return balances

    def finalize_and_sync(self, block_index: int) -> SyncReport:
        block = self.store.load_block(block_index)
        return finalize_and_sync(block, list(self.nodes.values()), self.params)

    def simulate(self, output_dir: Optional[Path] = None) -> Dict[str, Any]:
        """Election, then production rounds with incentives and sync

        A failed round still settles its incentives and leaves its report
        and the election transcript in ``output_dir`` before re-raising.
        """
        rounds = self.scenario.get('ROUNDS', DEFAULT_ROUNDS)
        per_round = self.scenario.get('TRANSACTIONS_PER_ROUND', DEFAULT_TRANSACTIONS_PER_ROUND)
        if output_dir is not None:
            output_dir = Path(output_dir)
            output_dir.mkdir(parents=True, exist_ok=True)

        election = self.run_election()
        if output_dir is not None:
            write_json(output_dir / 'election_transcript.json', election.transcript)
        round_reports = []
        sync_reports = []
        for round_index in range(rounds):
            self.submit_transactions(per_round)
            try:
                report = self.run_production_round(round_index)
            except RoundFailed as e:
                if e.report is not None:
                    self.apply_incentives(e.report)
                    if output_dir is not None:
                        write_json(output_dir / f"round_{round_index:03d}.json", e.report.to_dict())
                raise
            self.apply_incentives(report)
            sync_reports.append(self.finalize_and_sync(report.block_index).to_dict())
            round_reports.append(report.to_dict())
            if output_dir is not None:
                write_json(output_dir / f"round_{round_index:03d}.json", round_reports[-1])

        summary = {
            'seed': self.seed,
            'elected': election.elected,
            'tallies': {k: t.total for k, t in election.tallies.items()},
            'blocks': len(self.store),
            'balances': self.ledger.balances(),
            'excluded': sorted(self.ledger.excluded_nodes()),
        }
        if output_dir is not None:
            write_json(output_dir / 'sync_reports.json', sync_reports)
            write_json(output_dir / 'summary.json', summary)
        logger.info(f"Simulation finished: {summary['blocks']} blocks, elected {summary['elected']}")
        return {
            'summary': summary,
            'election': election,
            'rounds': round_reports,
            'sync': sync_reports,
        }


def write_json(path: Path, data: Any) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True)


def run_directory(base: Path, seed: Optional[int] = None) -> Path:
    """``base/seed-<n>`` under a fixed seed, otherwise a timestamped subdirectory"""
    name = f"seed-{seed}" if seed is not None else datetime.now().strftime('%Y%m%d-%H%M%S-%f')
    path = Path(base) / name
    path.mkdir(parents=True, exist_ok=True)
    return path
