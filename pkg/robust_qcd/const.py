CONFIG_NODE_ROOT = "robust_qcd"
CONFIG_NODE_MONTE_CARLO = "monte_carlo"
CONFIG_NODE_CALIBRATION = "calibration"

# Delays reported for the Gaussian mean-shift example at alpha = 0.001, keyed by theta.
# Columns: optimal CUSUM, robust CUSUM, GLR.
TABLE1_REFERENCE = {
    0.1: (242.7, 242.7, 496.0),
    0.2: (111.5, 116.8, 184.0),
    0.4: (43.2, 55.6, 57.2),
    0.6: (23.5, 36.3, 28.6),
    1.0: (10.5, 21.5, 12.35),
}

# epsilon-contamination with sigma_0 = 1, keyed by sigma_1.
# Columns: (robust, optimal) for eps = 0.05, then (robust, optimal) for eps = 0.005.
TABLE2_REFERENCE = {
    0.1: (14.77, 9.17, 11.27, 10.38),
    0.5: (14.86, 9.12, 11.27, 10.39),
    1.0: (15.09, 9.08, 11.27, 10.35),
    5.0: (15.52, 8.78, 11.29, 10.33),
    10.0: (15.59, 8.65, 11.29, 10.34),
}

# optimal CUSUM with sigma_1 = 1, keyed by sigma_0. Columns: eps = 0.05, eps = 0.005.
TABLE3_REFERENCE = {
    0.1: (10.56, 10.55),
    0.5: (10.50, 10.52),
    1.0: (10.44, 10.56),
    5.0: (10.02, 10.58),
    10.0: (9.85, 10.59),
}

CUSUM_RELATIVE_TOLERANCE = 0.05
GLR_RELATIVE_TOLERANCE = 0.10
TABLE2_ROBUST_SPREAD = 0.06

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_ACCEPTANCE_MISS = 3
