"""
Shape of the transformer training-iteration fixture.
"""

TRANSFORMER_LAYERS = 12
TRANSFORMER_HEADS = 16
TRANSFORMER_HIDDEN = 2048

# Collective buffers cycle through this ladder along the iteration, 1 MiB .. 64 MiB
BUFFER_LADDER_MIB: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)

# Compute time per unit of hidden**2 work, calibrated so a 2048-wide layer takes ~1 ms
SECONDS_PER_HIDDEN_SQUARED = 1e-3 / (2048 * 2048)
ATTENTION_WORK_FACTOR = 1.0
MLP_WORK_FACTOR = 2.0
BACKWARD_WORK_FACTOR = 2.0
OPTIMIZER_STEP_S = 50e-6

# An L-to-L activation transfer crosses a stage boundary every this many layers
STAGE_LAYERS = 4
ACTIVATION_BYTES_PER_HEAD = 256 * 1024
