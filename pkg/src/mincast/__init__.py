"""Minimum-cost network coding for single-source multicast.

Exact-rational information-flow optimization plus explicit code construction:
model a capacitated network, solve a linear (or integer) program for one of
five cost objectives, rewrite the optimum into a gadget-level multicast code
over GF(2^m), and verify that every receiver can decode.
"""

from .netmodel import (
    CODING,
    ROUTING,
    Edge,
    InfeasibleRateError,
    Network,
    NetworkError,
    NonIntegralError,
    PathSet,
    Rational,
    UnitExpansion,
    expand_and_decompose,
    format_rational,
    load_network,
    max_flow,
    multicast_capacity,
    parse_network,
    parse_rational,
    random_network,
)
from .flowalg import (
    Catalog,
    CatalogError,
    ConservationError,
    FlowSolution,
    NodeVars,
    Violation,
    build_catalog,
    check_conservation,
    check_solution,
    dump_solution,
    i_k,
    load_solution,
    overlap_vectors,
    particular_solution,
    scale_network,
    scale_solution,
    solution_from_document,
    solution_to_document,
    time_instances,
    witness_solution,
)
from .simplex import (
    EQUAL,
    GREATER_EQUAL,
    INFEASIBLE,
    LESS_EQUAL,
    LinearProgram,
    LpResult,
    MAX,
    MIN,
    OPTIMAL,
    ResourceLimitError,
    SolverError,
    UNBOUNDED,
    solve_ilp,
    solve_lp,
)
from .optimizer import (
    FREE,
    MAX_RATE,
    MIN_CODING_NODES,
    MIN_CODING_OPERATIONS,
    MIN_PACKETS_CODED,
    MIN_RESOURCE,
    OBJECTIVE_KINDS,
    Objective,
    OptimizeOutcome,
    OptimizerError,
    build_lp,
    build_objective,
    extract_solution,
    optimize,
    solution_assignment,
)
from .codegen import (
    CodedNetwork,
    CodegenError,
    DegreeMismatchError,
    FieldSpec,
    GadgetCycleError,
    GadgetGraph,
    InvalidSolutionError,
    ModelViolationError,
    assign_code,
    code_report,
    expand_gadgets,
    gadget_dot,
    network_dot,
    remove_cycles,
    verify_code,
)
from .gf2m import GF2m, find_irreducible, is_irreducible

__version__ = "0.1.0"
