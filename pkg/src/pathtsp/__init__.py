"""Exact tooling for the metric s-t path TSP.

Solves the standard path relaxation exactly, decomposes the optimum into
spanning trees with the nested-cut prefix structure, runs best-of-many
Christofides with lonely edge deletion, and certifies the proved
performance ratio per instance; a companion LP optimizes the weight
function behind the averaged analysis.
"""

from .bomc import (BomcResult, TreeContext, TreeTourResult, best_of_many,
                   build_tree_context, min_tjoin, reconnect, run_pipeline,
                   tour_from_tree)
from .certificates import (AnalysisParams, CertificateReport, PolyhedronCheck,
                           aggregate_certificate, build_parity_vector,
                           build_repair_vector, check_modified_cost_bound,
                           check_tjoin_polyhedron, per_tree_bound,
                           repair_budget_surplus)
from .decomposition import (DecompositionStats, StructuredDecomposition,
                            VerificationReport, WeightedTree,
                            base_decomposition, structured_decomposition,
                            tree_convex_combination, verify_structured)
from .errors import (CheckFailed, InputError, InvariantViolation, PathTSPError,
                     ResourceLimit, StructureError)
from .graphs import (connected_components, eulerian_st_walk, max_flow_min_cut,
                     min_spanning_connector, shortcut)
from .harness import (brute_force_path, gen_instance, oracle_min_tjoin_cost,
                      oracle_narrow_cuts, parse_instance, serialize_instance)
from .hopt import (OptimizedWeight, check_default_weight_inequalities,
                   condition_residual, optimize_weight)
from .lp import LPModel, LPOutcome, lp_resolve, lp_solve
from .model import (Cut, Edge, EdgeVector, MetricInstance, Multigraph,
                    all_edges, cut_value, edge, validate_metric)
from .pathlp import (FractionalSolution, NarrowCut, NarrowCutChain,
                     find_violated_cut, narrow_cuts, solve_path_lp)
from .weightfn import (RHO_STAR, WeightFunction, max_condition_residual,
                       performance_ratio)

__version__ = "0.1.0"
