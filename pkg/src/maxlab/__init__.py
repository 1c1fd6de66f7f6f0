"""Numerics for centered maximal averages over symmetric convex bodies.

Submodules:

* bodies    convex body zoo (balls, boxes, cross polytopes, V-polytopes,
            linear images) with exact volumes and gauges
* symtensor symmetric tensors stored by sorted multi-index
* moments   exact moment tensors, isotropic normalization, harmonic
            derivative coefficients, and the fourth/sixth order defect
            certificates
* fields    scalar grid fields, norms, level-set measures, laplacian
* maxop     the discrete maximal transform, iteration, growth ratios,
            level-set experiments, small-dilation probes
* covering  greedy covering selection and empirical overlap constants
* cli       TOML-driven experiment runner
"""

__version__ = "0.1.0"

from .bodies import (AxisBox, Ball, Body, CrossPolytope, LinearImage,
                     VPolytope, body_from_dict, body_from_json,
                     body_to_json, random_symmetric_polytope)
from .covering import CoverInput, CoverReport, greedy_cover, overlap_at
from .errors import (ConfigError, DegenerateBodyError, FieldGeometryError,
                     GeometryError, IsotropyError, LabError,
                     SingularMatrixError)
from .fields import (ScalarField, check_domination, discrete_laplacian,
                     dominates, field_from_function, indicator_field,
                     load_field, lp_norm, save_field, slice_csv,
                     superlevel_measure, tent_field, two_bump_field)
from .maxop import (AveragingKernel, DilationLadder, IterateResult,
                    build_kernel, growth_ratio, iterate,
                    levelset_experiment, max_transform, quartic_probe,
                    richardson_limit, superharmonicity_check)
from .moments import (certify, green_coeffs, green_coeffs_exact,
                      isotropize, isotropy_error, laplacian_defect,
                      moment_tensor, moment_tensor_exact, normalizing_matrix,
                      obstruction, quasi_uniform_rotations, rotation_scan)
from .symtensor import SymmetricTensor

__all__ = [
    "__version__",
    "AxisBox", "Ball", "Body", "CrossPolytope", "LinearImage", "VPolytope",
    "body_from_dict", "body_from_json", "body_to_json",
    "random_symmetric_polytope",
    "CoverInput", "CoverReport", "greedy_cover", "overlap_at",
    "ConfigError", "DegenerateBodyError", "FieldGeometryError",
    "GeometryError", "IsotropyError", "LabError", "SingularMatrixError",
    "ScalarField", "check_domination", "discrete_laplacian", "dominates",
    "field_from_function", "indicator_field", "load_field", "lp_norm",
    "save_field", "slice_csv", "superlevel_measure", "tent_field",
    "two_bump_field",
    "AveragingKernel", "DilationLadder", "IterateResult", "build_kernel",
    "growth_ratio", "iterate", "levelset_experiment", "max_transform",
    "quartic_probe", "richardson_limit", "superharmonicity_check",
    "certify", "green_coeffs", "green_coeffs_exact", "isotropize",
    "isotropy_error", "laplacian_defect", "moment_tensor",
    "moment_tensor_exact", "normalizing_matrix", "obstruction",
    "quasi_uniform_rotations", "rotation_scan",
    "SymmetricTensor",
]
