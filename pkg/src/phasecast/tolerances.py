"""Numerical tolerances shared by every module.

Kept in one place so that tests, the validation runner and the library
agree on what "equal" means.
"""

# state validity
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_NEG_TOL = 1e-10
BLOCH_NORM_TOL = 1e-12

# input rejection (looser than the invariants above so that values
# produced by our own arithmetic are never rejected)
EIG_HERMITIAN_TOL = 1e-10
DEVEC_TOL = 1e-9
UNPHYSICAL_BLOCH_TOL = 1e-9
UNIT_AXIS_TOL = 1e-9

# channel
KRAUS_COMPLETENESS_TOL = 1e-10
KRAUS_SQRT_CLAMP_TOL = 1e-12
CP_TOL = 1e-12
COVARIANCE_TOL = 1e-6

# Fisher information
QFI_NULL_DENOM = 1e-12
QFI_NULL_ELEMENT = 1e-8
VARIANCE_TOL = 1e-14
PROB_TOL = 1e-14
PROB_DERIV_TOL = 1e-12
INDETERMINATE_DENOM = 1e-14

# derivatives
DERIV_STABLE_RTOL = 1e-7
DERIV_FLAG_RTOL = 1e-5
STATE_FD_STEP = 1e-4

# settings
XSTATE_ALPHA_TOL = 1e-12
PARALLEL_PHI_MIN = 1e-3
