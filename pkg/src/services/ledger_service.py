"""SQLite-backed incentive ledger: rewards, misbehaviour flags, exclusions"""
import logging
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Set, Union

from src import config
from src.exceptions import QuantumChainError

logger = logging.getLogger(__name__)


class IncentiveLedger:
    """Reward balances and exclusion status per node"""

    def __init__(
        self,
        db_path: Union[str, Path] = ':memory:',
        producer_reward: int = config.PRODUCER_REWARD,
        validator_reward: int = config.VALIDATOR_REWARD,
        timeout_limit: int = config.TIMEOUT_EXCLUSION_ROUNDS,
    ):
        try:
            if str(db_path) != ':memory:':
                Path(db_path).parent.mkdir(parents=True, exist_ok=True)
            self.db_path = str(db_path)
            self.producer_reward = producer_reward
            self.validator_reward = validator_reward
            self.timeout_limit = timeout_limit
            self.conn = sqlite3.connect(self.db_path)
            self.conn.row_factory = sqlite3.Row
            self._create_tables()
            logger.info(f"Incentive ledger initialized at {self.db_path}")
        except sqlite3.Error as e:
            logger.error(f"Failed to initialize ledger: {str(e)}")
            raise QuantumChainError(f"Failed to initialize ledger: {str(e)}")

    def _create_tables(self):
        with self.conn:
            self.conn.execute("""
                CREATE TABLE IF NOT EXISTS node_status (
                    node_id TEXT PRIMARY KEY,
                    balance INTEGER NOT NULL DEFAULT 0,
                    consecutive_timeouts INTEGER NOT NULL DEFAULT 0,
                    flagged INTEGER NOT NULL DEFAULT 0,
                    excluded INTEGER NOT NULL DEFAULT 0
                )
            """)
            self.conn.execute("""
                CREATE TABLE IF NOT EXISTS rewards (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    round_index INTEGER NOT NULL,
                    node_id TEXT NOT NULL,
                    amount INTEGER NOT NULL,
                    reason TEXT NOT NULL
                )
            """)

    def close(self):
        self.conn.close()

    def register_node(self, node_id: str) -> None:
        with self.conn:
            self.conn.execute("INSERT OR IGNORE INTO node_status (node_id) VALUES (?)", (node_id,))

    def credit(self, node_id: str, amount: int, round_index: int, reason: str) -> None:
        try:
            self.register_node(node_id)
            with self.conn:
                self.conn.execute(
                    "INSERT INTO rewards (round_index, node_id, amount, reason) VALUES (?, ?, ?, ?)",
                    (round_index, node_id, amount, reason),
                )
                self.conn.execute(
                    "UPDATE node_status SET balance = balance + ? WHERE node_id = ?",
                    (amount, node_id),
                )
            logger.info(f"Round {round_index}: credited {amount} to {node_id} ({reason})")
        except sqlite3.Error as e:
            logger.error(f"Failed to credit {node_id}: {str(e)}")
            raise QuantumChainError(f"Failed to credit {node_id}: {str(e)}")

    def flag(self, node_id: str, round_index: int, evidence: str) -> None:
        """Mark a node as misbehaving; it is excluded from the next election"""
        self.register_node(node_id)
        with self.conn:
            self.conn.execute(
                "UPDATE node_status SET flagged = 1, excluded = 1 WHERE node_id = ?",
                (node_id,),
            )
        logger.warning(f"Round {round_index}: flagged {node_id}: {evidence}")

    def record_timeout(self, node_id: str, round_index: int) -> bool:
        """Count a missed window; returns True once the node is excluded"""
        self.register_node(node_id)
        with self.conn:
            self.conn.execute(
                "UPDATE node_status SET consecutive_timeouts = consecutive_timeouts + 1 WHERE node_id = ?",
                (node_id,),
            )
            self.conn.execute(
                "UPDATE node_status SET excluded = 1 WHERE node_id = ? AND consecutive_timeouts >= ?",
                (node_id, self.timeout_limit),
            )
        excluded = self.status(node_id)['excluded']
        if excluded:
            logger.warning(f"Round {round_index}: {node_id} excluded after {self.timeout_limit} consecutive timeouts")
        return bool(excluded)

    def reset_timeouts(self, node_id: str) -> None:
        self.register_node(node_id)
        with self.conn:
            self.conn.execute(
                "UPDATE node_status SET consecutive_timeouts = 0 WHERE node_id = ?",
                (node_id,),
            )

    def status(self, node_id: str) -> Dict[str, Any]:
        row = self.conn.execute("SELECT * FROM node_status WHERE node_id = ?", (node_id,)).fetchone()
        if row is None:
            return {'node_id': node_id, 'balance': 0, 'consecutive_timeouts': 0, 'flagged': 0, 'excluded': 0}
        return dict(row)

    def balance(self, node_id: str) -> int:
        return int(self.status(node_id)['balance'])

    def balances(self) -> Dict[str, int]:
        rows = self.conn.execute("SELECT node_id, balance FROM node_status ORDER BY node_id").fetchall()
        return {row['node_id']: int(row['balance']) for row in rows}

    def excluded_nodes(self) -> Set[str]:
        rows = self.conn.execute("SELECT node_id FROM node_status WHERE excluded = 1").fetchall()
        return {row['node_id'] for row in rows}

    def history(self) -> List[Dict[str, Any]]:
        rows = self.conn.execute("SELECT * FROM rewards ORDER BY id").fetchall()
        return [dict(row) for row in rows]

    def apply_round(self, report: Any) -> Dict[str, int]:
        """Pay the producer and approving validators of an accepted block

        Tampering producers are flagged; idle ones accumulate timeouts.
        Returns the balances after the round.
        """
        for attempt in report.attempts:
            if attempt.outcome == 'timeout':
                self.record_timeout(attempt.representative, report.round_index)
            elif attempt.outcome == 'rejected' and attempt.misbehaviour:
                self.flag(attempt.representative, report.round_index, '; '.join(attempt.evidence))
            elif attempt.outcome == 'accepted':
                self.reset_timeouts(attempt.representative)
                self.credit(attempt.representative, self.producer_reward, report.round_index, 'block produced')
                for validator in attempt.approving_validators:
                    self.credit(validator, self.validator_reward, report.round_index, 'block approved')
        return self.balances()
