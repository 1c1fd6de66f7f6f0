"""Numeric policy knobs used across modules.

These are deliberately plain module constants: every cap here is a policy
choice, not a physical constant, and experiments may override the ones that
take keyword arguments.
"""

# Largest condition number accepted for linear maps and order-2 moment
# matrices.  Bodies are allowed arbitrary eccentricity in principle; this cap
# keeps pullbacks and normalizers numerically meaningful.
CONDITION_CAP = 1.0e8

# |Q| above this certifies a nonzero obstruction on the floating-point path.
# Rational bodies get an exact decision instead and ignore this threshold.
CERT_EPSILON = 1.0e-8

# Max per-entry deviation of the order-2 moment tensor from the identity for
# a body to be accepted as isotropic by the obstruction entry points.
ISOTROPY_TOL = 1.0e-6

# Orthogonality tolerance (Gram deviation) for rotation matrices.
ORTHOGONALITY_TOL = 1.0e-10

# Default evaluation point distance for derivative tensors of |x|^(2-d).
DEFAULT_POINT_RADIUS = 3.0

# Fixed-point iteration defaults: stop when the sup-norm change drops to
# the tolerance, and never run more than the cap.
DEFAULT_STOP_TOL = 1.0e-4
DEFAULT_MAX_ITERATIONS = 200

# Geometric dilation ladders must be at least this fine (successive ratio
# at most this) so the sup over dilations is adequately sampled.
MAX_LADDER_RATIO = 1.2

# Boundary cells of averaging kernels are resolved by supersampling each
# cell with this many sub-points per axis.
KERNEL_SUPERSAMPLE = 4
