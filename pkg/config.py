"""Configuration management for Micro-Net."""
import os

# Runtime settings come from environment variables.
# Everything else (architecture, training, data) lives in run config files.

# Threading - must be exported before numpy is imported anywhere
MICRONET_THREADS = os.getenv("MICRONET_THREADS", "").strip()
if MICRONET_THREADS:
    if not MICRONET_THREADS.isdigit() or int(MICRONET_THREADS) < 1:
        raise ValueError(
            f"MICRONET_THREADS must be a positive integer, got '{MICRONET_THREADS}'"
        )
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, MICRONET_THREADS)

# Numeric precision used for training tensors (gradient checks always use float64)
MICRONET_PRECISION = os.getenv("MICRONET_PRECISION", "float32").strip()
if MICRONET_PRECISION not in ("float32", "float64"):
    raise ValueError(
        f"MICRONET_PRECISION must be float32 or float64, got '{MICRONET_PRECISION}'"
    )

MICRONET_LOG_LEVEL = os.getenv("MICRONET_LOG_LEVEL", "INFO").strip().upper()

# Run ledger database (empty = SQLite file inside the run output directory)
DATABASE_URL = os.getenv("DATABASE_URL", "").strip()
if DATABASE_URL.startswith("postgres://"):
    DATABASE_URL = DATABASE_URL.replace("postgres://", "postgresql://", 1)
LEDGER_FILENAME = "runs.db"

# Fire-module family
BASE_E = 64
FREQ = 2
SQUEEZE_RATIO_TEXT = 0.125  # value stated in the training setup
SQUEEZE_RATIO = 0.25        # value the architecture table is built with
P3X3 = 0.5

# Training protocol
LEARNING_RATE = 0.001
MOMENTUM = 0.9
WEIGHT_DECAY = 0.00005
BATCH_SIZE = 2
EPOCHS = 20
FLIP_PROBABILITY = 0.5
LOG_CLAMP = 1e-12

# Data
N_CLASSES = 2
TRAIN_FRACTION = 0.9
PATCH_SIZE = 500
SYNTHETIC_COUNT = 200
SYNTHETIC_SIZE = 64
