"""Energy functionals for the two problem variants, their gradients and residuals.

A model without a source term is the homogeneous eigenvalue-type problem
("P1" throughout the solver layer); adding a source gives the perturbed
problem ("P2").  The energy is

    E(u) = double form of the primitive  -  (lam/q) ||u||_q^q  -  (f, u)

and a grid function is a discrete weak solution when the pairings of the
energy derivative against every interior hat function vanish up to
tolerance, measured in the normalized dual estimate of ``WeakResidual``.

When the nonlinearity is linear (pure power law with p = 2) the double form
is bilinear, and energy/gradient evaluations route through an assembled
stiffness matrix built from the very same quadrature table; the generic
path is kept for every other instance and the two agree to float
associativity (the brute-force oracle in the test suite checks both).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._reduction import det_sum
from .kernels import KernelSpec, PhiSpec
from .mesh import (
    GridFunction,
    Mesh1D,
    QuadratureRule,
    _tail_allowed,
    basis_w0_norms,
    evaluate_source,
    gagliardo_seminorm,
    lq_norm,
    pair_table,
    seminorm_matrix,
    single_table,
    tail_weight,
)

__all__ = [
    "EnergyModel",
    "WeakResidual",
    "PSDiagnostic",
    "operator_pairing",
    "energy",
    "energy_parts",
    "gradient",
    "pairing_vector",
    "operator_dual_norm",
    "residual_p1",
    "residual_p2",
    "ps_diagnostic",
    "source_dual_norm",
]


@dataclass(frozen=True, eq=False)
class EnergyModel:
    """Full problem datum: nonlinearity, kernel, reaction strength, source.

    ``source=None`` selects the homogeneous variant.  The reaction exponent
    must satisfy q > max(p, 2) and stay below the critical exponent; the
    q <= 2 range is rejected because |u|**(q-2)*u would have a singular
    derivative at the origin and the solvers assume the continuous
    extension by 0 only for q > 2.
    """

    phi: PhiSpec
    kernel: KernelSpec
    lam: float
    q: float
    mesh: Mesh1D
    source: GridFunction | Callable[[np.ndarray], np.ndarray] | None = None
    quad: QuadratureRule = field(default_factory=QuadratureRule)

    def __post_init__(self):
        if self.phi.p != self.kernel.p:
            raise ValueError("nonlinearity and kernel must share the exponent p")
        if not self.lam > 0.0:
            raise ValueError("reaction strength must be positive")
        if self.q <= 2.0:
            raise ValueError("reaction exponent q must exceed 2")
        if self.q <= self.p:
            raise ValueError("constraint violated: q must lie in (p, p_s^*)")
        if self.q >= self.kernel.critical_exponent:
            raise ValueError("constraint violated: q must lie in (p, p_s^*)")
        if isinstance(self.source, GridFunction):
            if self.source.mesh.key() != self.mesh.key():
                raise ValueError("source grid function lives on a different mesh")
        object.__setattr__(self, "_cache", {})

    @property
    def p(self) -> float:
        return self.phi.p

    @property
    def has_source(self) -> bool:
        return self.source is not None

    @property
    def cap_product(self) -> float:
        """Combined ellipticity constant of nonlinearity and kernel."""
        return self.phi.lambda_cap * self.kernel.lambda_cap

    def without_source(self) -> "EnergyModel":
        return replace(self, source=None)

    def with_source(self, source) -> "EnergyModel":
        return replace(self, source=source)

    # -- assembled helpers, all cached on the instance -------------------

    def _bilinear(self) -> np.ndarray | None:
        """Stiffness matrix of the double form when the nonlinearity is linear."""
        if self.phi.homogeneous_degree != 1.0:
            return None
        cache = self._cache
        if "A" not in cache:
            pt = pair_table(self.mesh, self.quad)
            mat = pt.bilinear(pt.kernel_weights(self.kernel))
            if _tail_allowed(self.kernel, self.quad, weighted=True):
                st = single_table(self.mesh, self.quad)
                om = tail_weight(self.mesh, st.x, self.kernel.s, self.p)
                c = 2.0 * st.w * om
                nn = self.mesh.n_nodes
                flat = np.zeros(nn * nn)
                for ia, ha in ((st.i0, st.p0), (st.i1, st.p1)):
                    for ib, hb in ((st.i0, st.p0), (st.i1, st.p1)):
                        flat += np.bincount(ia * nn + ib, weights=c * ha * hb,
                                            minlength=nn * nn)
                mat = mat + flat.reshape(nn, nn)
            cache["A"] = mat
        return cache["A"]

    def source_vector(self) -> np.ndarray:
        """Pairings of the source against every interior hat."""
        cache = self._cache
        if "F" not in cache:
            st = single_table(self.mesh, self.quad)
            fv = evaluate_source(self.source, self.mesh, st.x)
            cache["F"] = st.scatter(st.w * fv)[1:-1]
        return cache["F"]

    def basis_norms(self) -> np.ndarray:
        return basis_w0_norms(self.mesh, self.kernel, self.p, self.quad)


@dataclass(frozen=True)
class WeakResidual:
    """Dual-norm surrogate of the energy derivative.

    ``per_testfunction`` holds the pairing against each interior hat divided
    by that hat's solution-space norm; the dual estimate is the max of the
    absolute entries.  ``vector`` keeps the raw (unnormalized) pairings for
    solver use.
    """

    per_testfunction: np.ndarray
    dual_norm_estimate: float
    vector: np.ndarray


def _phi_terms(u: GridFunction, model: EnergyModel):
    pt = pair_table(model.mesh, model.quad)
    wk = pt.kernel_weights(model.kernel)
    ux, uy = pt.side_values(u.full_values)
    return pt, wk, ux - uy


def _tail_pairing_factor(u: GridFunction, model: EnergyModel, st) -> np.ndarray:
    """Pointwise factor of the closed-form tail in derivative pairings.

    Both argument orders contribute: for x inside / y beyond the strip the
    integrand carries phi(u(x)); for the swapped order it carries
    -phi(-u(y)).  Nothing assumes phi odd.
    """
    uq = st.values(u.full_values)
    ph = model.phi.phi
    return ph(uq) - ph(-uq)


def operator_pairing(u: GridFunction, v: GridFunction, model: EnergyModel) -> float:
    """Action of the nonlocal operator at u on the test function v."""
    if u.mesh.key() != model.mesh.key() or v.mesh.key() != model.mesh.key():
        raise ValueError("grid functions must live on the model mesh")
    a_mat = model._bilinear()
    tail_on = _tail_allowed(model.kernel, model.quad, weighted=True)
    if a_mat is not None:
        return float(v.full_values @ (a_mat @ u.full_values))
    pt, wk, du = _phi_terms(u, model)
    vx, vy = pt.side_values(v.full_values)
    total = det_sum(wk * model.phi.phi(du) * (vx - vy))
    if tail_on:
        st = single_table(model.mesh, model.quad)
        om = tail_weight(model.mesh, st.x, model.kernel.s, model.p)
        vv = st.values(v.full_values)
        total += det_sum(st.w * om * _tail_pairing_factor(u, model, st) * vv)
    return total


def pairing_vector(u: GridFunction, model: EnergyModel) -> np.ndarray:
    """Raw pairings of the operator at u against every interior hat."""
    a_mat = model._bilinear()
    if a_mat is not None:
        return (a_mat @ u.full_values)[1:-1]
    pt, wk, du = _phi_terms(u, model)
    vec = pt.scatter(wk * model.phi.phi(du))
    if _tail_allowed(model.kernel, model.quad, weighted=True):
        st = single_table(model.mesh, model.quad)
        om = tail_weight(model.mesh, st.x, model.kernel.s, model.p)
        vec = vec + st.scatter(st.w * om * _tail_pairing_factor(u, model, st))
    return vec[1:-1]


def reaction_vector(u: GridFunction, model: EnergyModel) -> np.ndarray:
    """Pairings of |u|**(q-2) u against every interior hat."""
    st = single_table(model.mesh, model.quad)
    uv = st.values(u.full_values)
    # q > 2, so |0|**(q-2)*0 extends continuously by 0
    vals = np.sign(uv) * np.abs(uv) ** (model.q - 1.0)
    return st.scatter(st.w * vals)[1:-1]


def energy_parts(u: GridFunction, model: EnergyModel) -> tuple[float, float, float]:
    """(double form of the primitive, ||u||_q^q, (f, u)) as separate terms."""
    a_mat = model._bilinear()
    st = single_table(model.mesh, model.quad)
    uv = st.values(u.full_values)
    lq_pow = det_sum(st.w * np.abs(uv) ** model.q)
    fv = evaluate_source(model.source, model.mesh, st.x)
    src = det_sum(st.w * fv * uv)
    if a_mat is not None:
        # primitive of a linear nonlinearity is t^2/2
        dbl = 0.5 * float(u.full_values @ (a_mat @ u.full_values))
        return dbl, lq_pow, src
    pt, wk, du = _phi_terms(u, model)
    dbl = det_sum(wk * model.phi.primitive(du))
    if _tail_allowed(model.kernel, model.quad, weighted=True):
        om = tail_weight(model.mesh, st.x, model.kernel.s, model.p)
        dbl += 2.0 * det_sum(st.w * om * model.phi.primitive(uv))
    return dbl, lq_pow, src


def energy(u: GridFunction, model: EnergyModel) -> float:
    dbl, lq_pow, src = energy_parts(u, model)
    return dbl - (model.lam / model.q) * lq_pow - src


def _residual_from_vector(vec: np.ndarray, model: EnergyModel) -> WeakResidual:
    norms = model.basis_norms()
    per = vec / norms
    return WeakResidual(per_testfunction=per,
                        dual_norm_estimate=float(np.max(np.abs(per))) if per.size else 0.0,
                        vector=vec)


def gradient(u: GridFunction, model: EnergyModel) -> WeakResidual:
    """Energy derivative paired against the interior hat basis."""
    vec = pairing_vector(u, model) - model.lam * reaction_vector(u, model)
    if model.has_source:
        vec = vec - model.source_vector()
    return _residual_from_vector(vec, model)


def residual_p1(u: GridFunction, model: EnergyModel) -> WeakResidual:
    """Weak-solution residual of the homogeneous variant (no source)."""
    if model.has_source:
        raise ValueError("homogeneous residual requested but the model has a source")
    return gradient(u, model)


def residual_p2(u: GridFunction, model: EnergyModel) -> WeakResidual:
    """Weak-solution residual of the perturbed variant (source present)."""
    if not model.has_source:
        raise ValueError("perturbed residual requested but the model has no source")
    return gradient(u, model)


def operator_dual_norm(u: GridFunction, model: EnergyModel) -> float:
    """Dual-norm surrogate of the operator image alone (no reaction, no source)."""
    vec = pairing_vector(u, model)
    return float(np.max(np.abs(vec / model.basis_norms())))


def source_dual_norm(model: EnergyModel) -> float:
    """Conjugate-exponent Lebesgue norm of the source on the model quadrature."""
    if not model.has_source:
        return 0.0
    p_conj = model.p / (model.p - 1.0)
    st = single_table(model.mesh, model.quad)
    fv = evaluate_source(model.source, model.mesh, st.x)
    return det_sum(st.w * np.abs(fv) ** p_conj) ** (1.0 / p_conj)


@dataclass(frozen=True)
class PSDiagnostic:
    """Boundedness diagnostic for gradient-flow style iterate sequences.

    ``q_energy_minus_pairing`` is q*E(u) - <E'(u), u> + (q-1)*(f, u), which
    equals q * (primitive double form) - <operator u, u> identically on the
    shared quadrature.  ``boundedness_lhs`` is ((q - p*cap^2) / (cap * p)) * ||u||^p
    with cap the combined ellipticity constant (the literature alternates
    between the squared and fourth-power constant here; both factors are
    exposed and neither is resolved).
    """

    q_energy_minus_pairing: float
    boundedness_lhs: float
    bound_ratio: float
    pairing: float
    pairing_lower: float
    pairing_upper: float
    norm_w0: float


def ps_diagnostic(u: GridFunction, model: EnergyModel) -> PSDiagnostic:
    dbl, lq_pow, src = energy_parts(u, model)
    e_val = dbl - (model.lam / model.q) * lq_pow - src
    pair_uu = operator_pairing(u, u, model)
    grad_u_dot_u = pair_uu - model.lam * lq_pow - src
    e9 = model.q * e_val - grad_u_dot_u + (model.q - 1.0) * src
    cap = model.cap_product
    nw = gagliardo_seminorm(u, model.kernel, p=model.p, weighted=False,
                            rule=model.quad)
    lhs = (model.q - model.p * cap ** 2) / (cap * model.p) * nw ** model.p
    if e9 == 0.0 and lhs == 0.0:
        ratio = 0.0
    elif e9 == 0.0:
        ratio = math.inf
    else:
        ratio = lhs / e9
    return PSDiagnostic(
        q_energy_minus_pairing=e9,
        boundedness_lhs=lhs,
        bound_ratio=ratio,
        pairing=pair_uu,
        pairing_lower=nw ** model.p / cap,
        pairing_upper=cap * nw ** model.p,
        norm_w0=nw,
    )
