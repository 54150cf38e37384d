"""Quantum-walk chain - command handlers"""

from . import chain_commands, election_commands, hash_command, walk_command

__all__ = ['chain_commands', 'election_commands', 'hash_command', 'walk_command']
