"""Classical and quantum sawtooth map laboratory.

Spectral and gate-level propagators for the quantum map, classical
ensembles, simulated measurement protocols and the fits that turn their
output into localization lengths, diffusion rates and fidelities.
"""

__version__ = "0.1.0"

from qsaw.params import MapParams, derive_params, params_from_config  # noqa: E402
from qsaw.propagator import StateVector, evolve, init_momentum_state  # noqa: E402

__all__ = [
    "MapParams",
    "StateVector",
    "derive_params",
    "evolve",
    "init_momentum_state",
    "params_from_config",
]
