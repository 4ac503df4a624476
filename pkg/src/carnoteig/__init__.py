"""First (2, q) eigenpair of mixed sub-Laplacian / fractional operators on
Heisenberg groups (and R^d), with numerical checks of the associated
identities."""
from .errors import (
    CarnotError, ConfigurationError, ConvergenceError, DomainError, StructuralError,
)
from .groups import (
    GroupSpec, dilate, homogeneous_dimension, identity, inverse, koranyi_norm, multiply,
    unit_ball_volume, vector_field_coeffs,
)
from .discretize import (
    DomainMask, Grid, QuadraticForm, apply_B, assemble_local_form, assemble_nonlocal_form,
    build_form, build_grid, form_apply, form_energy, lq_norm, pairing, sample,
)
from .eigensolve import (
    Eigenpair, IterationTrace, cg_solve, dense_smallest_eigenpair, inverse_iteration,
    rayleigh_quotient, simplicity_check,
)
from .verify import (
    commutator_check, embedding_ratio, negative_lambda_check, operator_property_suite,
    pohozaev_residual, positivity_check,
)
from .kernels import BACKEND

__version__ = "0.1.0"
