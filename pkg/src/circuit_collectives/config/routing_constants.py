"""
Search limits for the physical circuit routers.
"""

# Intra-server MZI mesh
MESH_TRIALS = 16
MESH_PENALIZE_FACTOR = 2.0
MESH_MAX_OVERLAP = 1
MESH_BASE_WEIGHT = 1.0
# Circuits are unidirectional; each direction of a segment has its own lane
MESH_DIRECTED_WAVEGUIDES = True
MESH_SEARCH_PENALIZE = "penalize"
MESH_SEARCH_K_SHORTEST = "k_shortest"

# Inter-server fibers
FIBER_EXHAUSTIVE_MAX_SERVERS = 6
FIBER_EXHAUSTIVE_MAX_REQUESTS = 6
FIBER_EXHAUSTIVE_MAX_COMBINATIONS = 200_000
FIBER_SEARCH_ITERATIONS = 30
FIBER_SEARCH_RESTARTS = 2
FIBER_HISTORY_WEIGHT = 1.0
FIBER_OVERFLOW_PENALTY = 64.0

DEFAULT_SEED = 0
