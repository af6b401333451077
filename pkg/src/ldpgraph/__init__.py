"""Locally differentially private triangle, k-star and clustering estimates."""

from .graph import (
    Graph,
    NeighborList,
    SubgraphClassCounts,
    clustering_coefficient,
    count_kstars,
    count_subgraph_classes,
    count_triangles,
    generate_er,
    load_edge_list,
    max_degree,
    project,
    sample_induced,
)
from .mech import ConstantSource, PrivacyBudget, RandomSource
from .estimators import (
    EstimatorOutput,
    central_lap_kstar,
    central_lap_triangle,
    estimate_clustering,
    local_2rounds_triangle,
    local_lap_kstar,
    local_rr_triangle,
    noisy_max_degree,
    triangle_coefficients,
)

__version__ = "0.1.0"
