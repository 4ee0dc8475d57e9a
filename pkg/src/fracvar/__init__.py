"""Nonlocal variational solvers on an interval.

Discretizes nonlocal p-Laplacian-type energies with singular-kernel
quadrature, computes critical points by mountain-pass saddle search and
sphere-constrained minimization, drives a vanishing-source homotopy toward
the homogeneous problem, and estimates fractional capacities of compact
sets.  Deterministic given a seed, with reproducible parallel reductions.
"""

from .capacity import (
    CompactSet1D,
    DiscreteMeasure,
    capacity_estimate,
    capacity_minimize,
    necessary_condition_probe,
)
from .functionals import (
    EnergyModel,
    WeakResidual,
    energy,
    energy_parts,
    gradient,
    operator_pairing,
    ps_diagnostic,
    residual_p1,
    residual_p2,
    source_dual_norm,
)
from .kernels import (
    KernelSpec,
    PhiSpec,
    eval_phi,
    eval_primitive,
    perturbed_kernel,
    perturbed_phi,
    power_phi,
    standard_kernel,
    validate_kernel,
    validate_phi,
)
from .mesh import (
    GridFunction,
    Mesh1D,
    QuadratureRule,
    duality_pairing,
    gagliardo_seminorm,
    lq_norm,
    poincare_constant,
    sobolev_norm,
    tail_truncation_bound,
    w0_norm,
)
from .solvers import (
    MountainPassGeometry,
    SolveReport,
    estimate_embedding_constants,
    f_peak_radius,
    f_profile_value,
    homotopy_to_p1,
    lambda1_threshold,
    mountain_pass_geometry,
    mountain_pass_solve,
    r0_maximizer,
    rayleigh_inf_estimate,
    sphere_constrained_solve,
)

__version__ = "0.1.0"
