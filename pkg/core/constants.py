"""Constants used throughout the application."""

# Toolkit version (best-effort; CLI uses package metadata when installed).
VERSION: str = "1.0.0"

# Gram matrices of smooth kernels are numerically near-singular, so positive
# semi-definiteness is judged relative to the trace rather than against zero.
PSD_TOLERANCE: float = 1e-10

# Lattice resolution for the numerical kappa bound when no closed form exists.
# The per-axis count is reduced in higher dimensions so the number of pairs
# stays near KAPPA_GRID_MAX_PAIRS.
KAPPA_GRID_POINTS: int = 64
KAPPA_GRID_MAX_PAIRS: int = 1_000_000
KAPPA_GRID_INFLATION: float = 1.01

# Largest support grid (m^2 ordered pairs) the spectral backend will diagonalise.
SPECTRAL_GRID_CAP: int = 2500

# Eigenvalues below this fraction of the largest one are treated as null.
SPECTRAL_NULL_TOLERANCE: float = 1e-10

# Reduced-mode runs keep the history Gram in memory up to this horizon.
GRAM_CACHE_MAX_T: int = 3000

# Default cap on configured horizons (`max_T`); reduced runs cost O(T^2) per trial.
MAX_HORIZON: int = 3000

# Monte Carlo pair count for rho-norms under continuous measures.
MC_PAIRS: int = 100_000

# Rate fits ignore t below this value; log factors dominate early steps.
RATE_FIT_T_MIN: int = 32

# Output directory
OUTPUT_DIR: str = "./output/"

# Environment variables
ENV_SEED: str = "OPERA_SEED"
ENV_LOG_LEVEL: str = "OPERA_LOG_LEVEL"
ENV_OUTPUT_DIR: str = "OPERA_OUTPUT_DIR"

# CSV column order for trial results
RESULT_COLUMNS: tuple[str, ...] = (
    "trial",
    "seed",
    "t",
    "gamma_t",
    "error_rho",
    "error_rho_stderr",
    "norm_K",
    "lemma1_bound",
    "thm1_bound",
    "mode",
)

# Exit codes
EXIT_SUCCESS = 0
EXIT_GENERAL_ERROR = 1
EXIT_INVALID_ARGUMENTS = 2
