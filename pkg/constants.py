TOOL_NAME = "arq-access"
VERSION = "0.3.0"

# Metric names accepted by ConstraintSpec and the per-state cost tables
METRIC_THROUGHPUT = "throughput"
METRIC_FAILURE_PROB = "failure_prob"
METRIC_NUM_TX = "num_tx"
METRICS = (METRIC_THROUGHPUT, METRIC_FAILURE_PROB, METRIC_NUM_TX)

SOLVERS = ("lp", "vertical", "horizontal", "enumerate")
SWEEP_VARIABLES = ("epsilon", "alpha", "rho", "lambda", "lambda_s")

# Numerical tolerances
PROB_TOL = 1e-12
BISECTION_MIN_WIDTH = 1e-14
BISECTION_MAX_ITER = 200
PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
SIMPLEX_MAX_ITER = 10000
TRANSIENT_TOL = 1e-10
OCCUPANCY_TOL = 1e-9
CONSTRAINT_TOL = 1e-9
TIE_TOL = 1e-12
SELF_CHECK_TOL = 1e-6
FD_STEP = 1e-6

# Enumeration solver explores 2^T patterns
ENUMERATE_MAX_T = 16

# Physical layer Monte Carlo
MIN_MC_SAMPLES = 10000
DEFAULT_MC_SAMPLES = 200000
DEFAULT_SEED = 42

# Slotted simulator
DEFAULT_SLOTS = 1000000
DEFAULT_WARMUP_SLOTS = 1000
N_BATCHES = 100
PRNG_NAME = "PCG64"
VALIDATION_SIGMAS = 5.0

# Exit codes of run_optimiser.py
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

# Reference instance: T=2 chain used throughout the tests and the README
REFERENCE_PARAMS = {
    "alpha": 0.8,
    "rho": 0.3,
    "lambda": 0.3,
    "nu": 0.0,
    "lambda_s": 0.0,
    "t_max": 2,
}
REFERENCE_EPSILON = 0.05
REFERENCE_KAPPA_1 = 0.2526

# Parameter families of the reproduced figures
EPSILON_SWEEP_PARAMS = {"alpha": 0.8, "rho": 0.3, "lambda": 0.3, "nu": 0.0, "lambda_s": 0.0, "t_max": 4}
FAILURE_PROB_PARAMS = {"alpha": 0.8, "rho": 0.3, "lambda": 0.1, "nu": 0.0, "lambda_s": 0.0, "t_max": 4}
GENERAL_CASE_PARAMS = {"alpha": 0.5, "rho": 0.2, "lambda": 0.6, "nu": 0.2, "lambda_s": 0.0, "t_max": 4}
ALPHA_SWEEP_EPSILON = 0.1
GENERAL_CASE_EPSILON = 0.05
