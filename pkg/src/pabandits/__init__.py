"""Simulation library for repeated principal-agent bandit games.

Modules: ``env`` (instances and the greedy agent), ``binsearch``, ``bandit``,
``ipa`` and ``baselines`` (multi-armed principals), ``geometry`` and ``cipa``
(contextual principal), ``harness`` and ``cli`` (experiments).
"""
__version__ = "0.1.0"
