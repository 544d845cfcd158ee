"""Invariant correlation toolkit: partitions, polytope membership, exact
bivariate checks, constructive models and invariance verification."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    AdmissibilityError,
    CapacityError,
    ConstructionError,
    DimensionError,
    InvCorrError,
    StructureError,
    ValidationError,
    WeightSumError,
)
from .partitions import (
    SetPartition,
    bell_number,
    clique_point,
    enumerate_partitions,
    partition_labels,
    partition_of_vector,
)
from .polytope import (
    CorrMatrix,
    MembershipCert,
    assemble_vd,
    lp_solve,
    membership,
    reconstruct,
)
from .bivariate import (
    JointPMF,
    RBounds,
    correlation,
    cyclic_remainder,
    is_quasi_independent,
    make_quasi_frechet,
    make_quasi_independent,
    quasi_frechet_fit,
    r_bounds,
    random_rearrangement,
    transform_correlation,
)
from .models import (
    ConformalSpec,
    GammaModel,
    conformal_corr,
    conformal_joint_pmf,
    expected_corr,
    model_from_membership,
    positive_frechet_model,
    sample_conformal,
    sample_gamma_model,
    sample_markov_model,
)
from .dependence import (
    GridPMF,
    discrete_gamma_grid,
    fgm_conditional_derivative,
    is_nqd,
    is_pqd,
    is_prd,
    tail_dependence_estimate,
)
from .verify import (
    InvarianceReport,
    TransformSpec,
    basis_transforms,
    copula_identity_check,
    transform_library,
    verify_exact,
    verify_mc,
)

