# Integer codes shared by the numpy and numba kernels.
ACCURACY = 0
MACRO_RECALL = 1
MACRO_PRECISION = 2
MACRO_F1 = 3
MACRO_F1_PRIME = 4
WEIGHTED_F1 = 5
KAPPA = 6
MCC = 7
BOOKMAKER_WIN = 8
CLASS_RECALL = 9

GEOMETRIC_EPS = 1e-12
