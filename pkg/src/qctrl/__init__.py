"""Population transfer in a decaying three-level system.

Submodules: ``dynamics`` (Lindblad propagation), ``stirap`` (reference
pulses and adiabaticity), ``oct`` (bounded pulse optimization), ``rl``
(REINFORCE agent) and ``harness`` (configs, sweeps, persistence).
"""

__version__ = "0.1.0"
