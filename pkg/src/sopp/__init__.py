"""Analysis and simulation of interference-aware opportunistic relaying (S-OPP)
on multi-hop line networks."""

__version__ = "0.1.0"

from .channel import (HopProbabilities, LinkBudget, Topology, db_to_linear, hop_probabilities,
                      success_no_interference, success_with_interference)
from .errors import (DegenerateChannelError, InvalidInputError, SingularityError, SoppError,
                     UnsupportedConfigurationError)
from .gf_analysis import (ThreeHopParams, approx_C, build_k_set, three_hop_delay,
                          three_hop_saturation, three_hop_saturation_symmetric, two_hop_delay,
                          two_hop_saturation)
from .simulator import SimConfig, SimStats, decide_transmitters, estimate_saturation, run, run_slot

__all__ = [
    "HopProbabilities", "LinkBudget", "Topology", "db_to_linear", "hop_probabilities",
    "success_no_interference", "success_with_interference", "DegenerateChannelError",
    "InvalidInputError", "SingularityError", "SoppError", "UnsupportedConfigurationError",
    "ThreeHopParams", "approx_C", "build_k_set", "three_hop_delay", "three_hop_saturation",
    "three_hop_saturation_symmetric", "two_hop_delay", "two_hop_saturation", "SimConfig",
    "SimStats", "decide_transmitters", "estimate_saturation", "run", "run_slot",
]
