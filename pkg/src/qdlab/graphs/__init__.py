"""Pairing-graph engine: permutation combinatorics, the self-energy
counterterm, and Monte Carlo evaluation of pairing-graph contributions."""

from .pairings import (  # noqa: F401
    PermutationPairing,
    boundary_degree,
    count_by_degree,
    degree,
    degree_count_bound,
    sample_permutations,
)
from .selfenergy import (  # noqa: F401
    SelfEnergy,
    holder_half_fit,
    renormalized_dispersion_check,
    self_energy,
)
from .values import (  # noqa: F401
    GraphBoundReport,
    GraphValueEstimate,
    crossing_bound_check,
    crossing_bound_study,
    degree_suppression_study,
    estimates_to_jsonl,
    free_pairing_reference,
    graph_value,
    graph_value_panel,
    ladder_rung,
)
