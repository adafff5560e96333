"""
Cost-model parameters, experiment sweeps and report formatting constants.

Defaults follow the scale-up setting the simulator models: 3 µs per transfer, 450 GB/s
links and a 5 µs circuit reconfiguration delay.
"""

# Byte units (buffer sizes are binary, link bandwidth is decimal)
KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB
GB = 10**9

# Extended alpha-beta model
ALPHA_S = 3e-6
LINK_BANDWIDTH_BYTES_PER_S = 450 * GB
BETA_S_PER_BYTE = 1.0 / LINK_BANDWIDTH_BYTES_PER_S
RECONF_DELAY_S = 5e-6
DISCONNECT_PENALTY_S = 1e6
DIRECTED_EDGE_CAPACITY = False

# Transceivers per GPU
TX_PER_GPU = 1
RX_PER_GPU = 1

# Sweeps
BUFFER_SWEEP_BYTES: tuple[int, ...] = tuple(MIB << k for k in range(11))  # 1 MiB .. 1 GiB
RECONF_SWEEP_S: tuple[float, ...] = (5e-6, 10e-6, 25e-6, 50e-6, 500e-6, 1e-3)
BENCHMARK_RANKS = 128
ENDTOEND_RANKS: tuple[int, ...] = (32, 64, 128)

BASELINE_TOPOLOGIES: tuple[str, ...] = ("ring", "torus2d", "torus3d", "grid2d", "grid3d")
BASELINE_ALGORITHMS: tuple[str, ...] = ("ring", "rhd", "bucket")
PLANNER_CANDIDATES: tuple[str, ...] = ("rhd", "ring", "bucket")
STANDARD_SET: tuple[str, ...] = ()

# Backend labels
BACKEND_BASELINE = "baseline"
BACKEND_RECONFIGURING = "pccl"
AUTO_ALGORITHM = "auto"

# Parallel scenario evaluation; 0 means one worker per physical core
DEFAULT_WORKERS = 1

# Reports
FLOAT_SIGNIFICANT_DIGITS = 9
REPORT_SCHEMA_VERSION = 1
