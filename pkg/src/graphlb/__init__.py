"""Load balancing on graphs: tasks arriving at a vertex join the shortest
queue in its closed neighborhood.

The package bundles graph generators, subset-coverage connectivity measures,
an exact continuous-time event simulator (plus a coupled companion scheme
whose miss counter bounds the occupancy gap), the mean-field ODE and
diffusion-scale transforms, and a configured experiment suite.
"""

__version__ = "0.1.0"

from .connectivity import (AuditReport, BudgetExceeded, DisReport, com,
                           dis_exact, dis_heuristic, optimality_audit,
                           threshold_size)
from .fluid import (BipartitePath, DiffusionPath, FluidPath,
                    bipartite_fluid_integrate, bipartite_fluid_rhs,
                    bipartite_stop_time, default_levels, diffusion_scale,
                    fluid_integrate, fluid_rhs, suboptimality_threshold)
from .graphs import (Graph, bipartite_part_size, closed_neighborhood,
                     gen_clique, gen_complete_bipartite, gen_erased_regular,
                     gen_erdos_renyi, gen_isolated, gen_ring, gen_rgg_torus,
                     gen_toric_grid, load_edge_list, rgg_radius,
                     save_edge_list, validate_graph)
from .rng import derive_seed
from .sim import (DISCARD, CoupledTrace, OccupancyState, SimConfig,
                  StationarySummary, Trace, assign_cjsq, assign_graph_jsq,
                  simulate, simulate_coupled, stationary_stats)

__all__ = [
    "__version__",
    "Graph", "gen_clique", "gen_ring", "gen_toric_grid", "gen_erdos_renyi",
    "gen_erased_regular", "gen_rgg_torus", "gen_complete_bipartite",
    "gen_isolated", "closed_neighborhood", "load_edge_list", "save_edge_list",
    "validate_graph", "rgg_radius", "bipartite_part_size",
    "com", "threshold_size", "dis_exact", "dis_heuristic", "optimality_audit",
    "DisReport", "AuditReport", "BudgetExceeded",
    "OccupancyState", "SimConfig", "Trace", "CoupledTrace",
    "StationarySummary", "simulate", "simulate_coupled", "stationary_stats",
    "assign_graph_jsq", "assign_cjsq", "DISCARD",
    "fluid_rhs", "fluid_integrate", "FluidPath", "default_levels",
    "bipartite_fluid_rhs", "bipartite_fluid_integrate", "BipartitePath",
    "bipartite_stop_time", "suboptimality_threshold",
    "diffusion_scale", "DiffusionPath",
    "derive_seed",
]
