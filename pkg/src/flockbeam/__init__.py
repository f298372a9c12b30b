"""Region formation and flocking-rule beamforming for wireless ad hoc networks."""
from .antenna import AntennaConfig, Beam, coverage, sector_beam, ula_gain
from .beamforming import (BeamDecision, choose_target, commit_beams, identify_peripherals,
                          sweep_sectors)
from .centrality import (CentralityScores, closeness, egocentric_betweenness,
                         sociocentric_betweenness)
from .graph import (MixedGraph, UnreachableError, average_path_length, clustering_coefficient,
                    gin, gscc, shortest_hops, weak_components)
from .harness import (ExperimentConfig, MetricsRecord, parse_config, run_experiment,
                      run_pipeline, summarize)
from .organize import (CentroidTable, ConsensusState, RegionState, Role, RoundEngine,
                       broadcast_centroids, centroid_consensus, consensus_all, elect_centroid,
                       lateral_inhibition, regions)
from .topology import (Placement, ThinningParams, build_omni_graph, expected_survivors,
                       place_uniform, thin)

__version__ = "0.1.0"
