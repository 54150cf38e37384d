"""Configuration module for the quantum-walk chain simulator"""
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values, load_dotenv

from src.exceptions import ConfigError

# Load environment variables from .env file
env_path = Path('.') / '.env'
load_dotenv(dotenv_path=env_path)

# Simulator limits
MAX_AMPLITUDES = int(os.getenv('QWC_MAX_AMPLITUDES', 2 ** 20))
AMPLITUDE_TOLERANCE = float(os.getenv('QWC_AMPLITUDE_TOLERANCE', 1e-9))
UNITARY_TOLERANCE = float(os.getenv('QWC_UNITARY_TOLERANCE', 1e-10))

# Block construction
DEFAULT_POSITION_DIM = int(os.getenv('QWC_POSITION_DIM', 16))
DEFAULT_WALKERS = int(os.getenv('QWC_WALKERS', 2))
DEFAULT_STEP_BOUND = int(os.getenv('QWC_STEP_BOUND', 32))

# Quantum-walk hash
HASH_CYCLE_SIZE = int(os.getenv('QWC_HASH_CYCLE', 8))
HASH_MIN_STEPS = int(os.getenv('QWC_HASH_MIN_STEPS', 16))

# Consensus
DEFAULT_DELTA = int(os.getenv('QWC_DELTA', 3))
DECOY_RATE = float(os.getenv('QWC_DECOY_RATE', 0.5))
DECOY_ERROR_THRESHOLD = float(os.getenv('QWC_DECOY_THRESHOLD', 0.05))
APPROVAL_QUORUM = Fraction(os.getenv('QWC_APPROVAL_QUORUM', '2/3'))
BLOCK_INTERVAL_MS = int(os.getenv('QWC_BLOCK_INTERVAL_MS', 1000))

# Incentives
PRODUCER_REWARD = int(os.getenv('QWC_PRODUCER_REWARD', 10))
VALIDATOR_REWARD = int(os.getenv('QWC_VALIDATOR_REWARD', 2))
TIMEOUT_EXCLUSION_ROUNDS = int(os.getenv('QWC_TIMEOUT_EXCLUSION', 2))

# Signatures
SIGNATURE_BITS = int(os.getenv('QWC_SIGNATURE_BITS', 32))
SIGNATURE_CAPACITY = int(os.getenv('QWC_SIGNATURE_CAPACITY', 8))

# Paths
BASE_DIR = Path(__file__).parent
DATA_DIR = BASE_DIR / 'data'
SCHEMA_DIR = BASE_DIR.parent / 'docs' / 'schemas'
LOG_DIR = Path(os.getenv('QWC_LOG_DIR', 'logs'))
LOG_LEVEL = os.getenv('QWC_LOG_LEVEL', 'INFO')
REFERENCE_SCENARIO_FILE = DATA_DIR / 'reference_scenario.env'

ADVERSARY_KINDS = ('none', 'intercept_resend', 'block_tamper', 'vote_forger', 'state_substitution')

# Keys accepted in scenario files and their parsers
_SCENARIO_KEYS = {
    'VOTERS': 'list',
    'WEIGHTS': 'floats',
    'CANDIDATES': 'list',
    'REPRESENTATIVES': 'int',
    'TOTAL_VOTES': 'int',
    'VALIDATORS': 'list',
    'FULL_NODES': 'list',
    'DELTA': 'int',
    'QUORUM': 'fraction',
    'BLOCK_INTERVAL_MS': 'int',
    'ROUNDS': 'int',
    'TRANSACTIONS_PER_ROUND': 'int',
    'POSITION_DIM': 'int',
    'WALKERS': 'int',
    'STEP_BOUND': 'int',
    'HASH_CYCLE': 'int',
    'DECOY_RATE': 'float',
    'DECOY_THRESHOLD': 'float',
    'DECOYS': 'bool',
    'ADVERSARY': 'str',
    'ADVERSARY_NODE': 'str',
    'ADVERSARY_MODE': 'str',
    'IDLE_NODES': 'list',
    'SEED': 'int',
}


def _parse_value(key: str, kind: str, raw: str) -> Any:
    """Parse a single scenario value"""
    try:
        if kind == 'list':
            return [item.strip() for item in raw.split(',') if item.strip()]
        if kind == 'floats':
            return [float(item) for item in raw.split(',') if item.strip()]
        if kind == 'ints':
            return [int(item) for item in raw.split(',') if item.strip()]
        if kind == 'int':
            return int(raw)
        if kind == 'float':
            return float(raw)
        if kind == 'fraction':
            return Fraction(raw.strip())
        if kind == 'bool':
            lowered = raw.strip().lower()
            if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(f"not a boolean: {raw}")
            return lowered in ('true', '1', 'yes')
        return raw.strip()
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"Invalid value for {key}: {raw!r} ({e})")


def load_scenario(path: Path, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Load a key-value scenario file

    Per-candidate votes are given as ``VOTES_<candidate>=v0,v1,...`` in voter
    order. Missing keys are left out so callers apply their own defaults.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Scenario file not found: {path}")

    raw_values = dotenv_values(path)
    scenario: Dict[str, Any] = {'VOTES': {}}

    for key, raw in raw_values.items():
        if raw is None:
            raise ConfigError(f"Missing value for {key}")
        if key.startswith('VOTES_'):
            candidate = key[len('VOTES_'):]
            scenario['VOTES'][candidate] = _parse_value(key, 'ints', raw)
            continue
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"Unknown scenario key: {key}")
        scenario[key] = _parse_value(key, _SCENARIO_KEYS[key], raw)

    if overrides:
        scenario.update({k: v for k, v in overrides.items() if v is not None})

    _check_scenario(scenario)
    return scenario


def _check_scenario(scenario: Dict[str, Any]) -> None:
    """Cross-field checks for a scenario"""
    voters: List[str] = scenario.get('VOTERS', [])
    weights: List[float] = scenario.get('WEIGHTS', [])
    if voters and weights and len(voters) != len(weights):
        raise ConfigError(f"VOTERS has {len(voters)} entries but WEIGHTS has {len(weights)}")

    candidates = scenario.get('CANDIDATES', [])
    for candidate, votes in scenario['VOTES'].items():
        if candidates and candidate not in candidates:
            raise ConfigError(f"Votes given for unknown candidate {candidate}")
        if voters and len(votes) != len(voters):
            raise ConfigError(f"VOTES_{candidate} must list one vote per voter")

    adversary = scenario.get('ADVERSARY', 'none')
    if adversary not in ADVERSARY_KINDS:
        raise ConfigError(f"Unknown adversary kind: {adversary}")

    quorum = scenario.get('QUORUM')
    if quorum is not None and not (Fraction(1, 2) < quorum <= 1):
        raise ConfigError(f"QUORUM must lie in (1/2, 1], got {quorum}")
