"""Statistical test thresholds shared by the verify command and the tests.

Kept in one place so every Monte Carlo comparison uses the same policy:
TV distance tolerance for histogram comparisons, the standard-error
multiplier for pointwise estimates, and the retry seed offset used when
a check is rerun once before being declared failed.
"""

TV_TOL = 0.01
SE_MULT = 3.0
MC_TRIALS = 100_000
DEFAULT_SEED = 20240
RETRY_SEED_OFFSET = 1_000_003
