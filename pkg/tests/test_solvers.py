import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.functionals import EnergyModel, energy, residual_p1, residual_p2, source_dual_norm
from fracvar.kernels import power_phi, standard_kernel
from fracvar.mesh import GridFunction, Mesh1D, gagliardo_seminorm, lq_norm
from fracvar.profiles import suite_with_random
from fracvar.solvers import (
    GuardWarning,
    estimate_embedding_constants,
    f_peak_radius,
    f_profile_value,
    homotopy_to_p1,
    lambda1_threshold,
    mountain_pass_geometry,
    mountain_pass_solve,
    r0_maximizer,
    rayleigh_inf_estimate,
    rayleigh_minimize,
    sphere_constrained_solve,
)


def test_lambda1_pinned_value():
    assert lambda1_threshold(2, 4, 1, 1, 1, 1) == pytest.approx(2.0 / 27.0, abs=1e-16)


def test_r0_pinned_value():
    assert r0_maximizer(2, 4, 1, 1, 1) == pytest.approx(2.0 / 3.0, abs=1e-16)


def test_lambda1_monotone_in_source_norm():
    vals = [lambda1_threshold(2, 4, 1, 1, 1, f) for f in (0.5, 1.0, 2.0, 10.0, 1e6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-10


def test_lambda1_cap_doubling_quarters():
    base = lambda1_threshold(2, 4, 1.0, 1, 1, 1)
    assert lambda1_threshold(2, 4, 2.0, 1, 1, 1) == pytest.approx(base / 4.0, rel=1e-14)


def test_r0_lambda_doubling_halves():
    base = r0_maximizer(2, 4, 1, 1.0, 1)
    assert r0_maximizer(2, 4, 1, 2.0, 1) == pytest.approx(base / 2.0, rel=1e-14)


def test_closed_form_guards():
    with pytest.raises(ValueError):
        lambda1_threshold(4, 2, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        lambda1_threshold(2, 4, 1, 1, 1, 0.0)
    with pytest.raises(ValueError):
        r0_maximizer(2, 4, 0.5, 1, 1)


def test_peak_radius_agrees_when_gap_is_one():
    r0 = r0_maximizer(2, 3, 1.3, 0.7, 2.1)
    assert f_peak_radius(2, 3, 1.3, 0.7, 2.1) == pytest.approx(r0, rel=1e-15)


@given(st.floats(1.5, 3.0), st.floats(0.3, 2.0), st.floats(1.0, 1.15),
       st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
@settings(max_examples=60)
def test_peak_is_profile_maximum(p, gap, cap, lam, c4, c5):
    # grid-search oracle: the corrected radius maximizes F over a wide window
    q = p + gap
    r_peak = f_peak_radius(p, q, cap, lam, c5)
    grid = r_peak * np.logspace(-1.0, 1.0, 401)
    f_grid = f_profile_value(grid, p, q, cap, lam, c4, c5, 1.0)
    f_peak = f_profile_value(np.array(r_peak), p, q, cap, lam, c4, c5, 1.0)
    assert f_peak >= np.max(f_grid) - 1e-12 * max(1.0, abs(f_peak))


def test_embedding_constants_monotone_in_samples(mesh16, kernel_sp):
    c4a, c5a = estimate_embedding_constants(mesh16, kernel_sp, 2.0, 4.0, n_samples=100)
    c4b, c5b = estimate_embedding_constants(mesh16, kernel_sp, 2.0, 4.0, n_samples=400)
    assert c4b >= c4a and c5b >= c5a


def test_embedding_constants_bound_suite(mesh16, kernel_sp):
    c4, c5 = estimate_embedding_constants(mesh16, kernel_sp, 2.0, 4.0, n_samples=200)
    for w in suite_with_random(mesh16, 200, seed=0):
        sn = gagliardo_seminorm(w, kernel_sp)
        if sn == 0:
            continue
        wn = w * (1.0 / sn)
        assert lq_norm(wn, 2.0) ** 2 <= c4 * (1.0 + 1e-12)
        assert lq_norm(wn, 4.0) ** 4 <= c5 * (1.0 + 1e-12)


def test_embedding_constants_sampling_stability(kernel_sp):
    mesh = Mesh1D(0.0, 1.0, 32)
    a = estimate_embedding_constants(mesh, kernel_sp, 2.0, 3.0, n_samples=500)
    b = estimate_embedding_constants(mesh, kernel_sp, 2.0, 3.0, n_samples=1000)
    for x, y in zip(a, b):
        assert abs(y - x) / x <= 0.05


def sphere_model(n=16, q=3.0, lam=1.0, source=None):
    mesh = Mesh1D(0.0, 1.0, n)
    return EnergyModel(phi=power_phi(2.0), kernel=standard_kernel(0.5, 2.0),
                       lam=lam, q=q, mesh=mesh, source=source)


def test_sphere_solver_constraint_and_descent():
    model = sphere_model()
    rep = sphere_constrained_solve(model, tol=1e-9, max_iter=2000)
    assert rep.converged
    assert np.all(np.abs(rep.norm_q_trace - 1.0) <= 1e-10)
    assert np.all(np.diff(rep.energy_trace) <= 1e-12)
    assert len(rep.energy_trace) == rep.iterations + 1
    assert rep.residual_trace[-1] <= 1e-9


def test_sphere_solver_beats_suite(mesh16):
    model = sphere_model()
    rep = sphere_constrained_solve(model, tol=1e-9, max_iter=2000)
    e_star = energy(rep.solution, model)
    for w in suite_with_random(model.mesh, 50, seed=2):
        nq = lq_norm(w, model.q)
        if nq == 0:
            continue
        assert e_star <= energy(w * (1.0 / nq), model) + 1e-10


def test_sphere_solver_p2_effective_lambda():
    # at a converged constrained critical point the iterate solves the
    # sourced problem with the multiplier as reaction strength
    model = sphere_model(source=lambda x: 0.05 * np.sin(np.pi * x))
    rep = sphere_constrained_solve(model, tol=1e-10, max_iter=3000)
    assert rep.converged
    lam_eff = rep.extras["effective_lambda"]
    shifted = EnergyModel(phi=model.phi, kernel=model.kernel, lam=lam_eff,
                          q=model.q, mesh=model.mesh, source=model.source,
                          quad=model.quad)
    res = residual_p2(rep.solution, shifted)
    assert res.dual_norm_estimate <= 1e-9


def test_sphere_solver_eigen_mode_q_small():
    # pure norm minimization on the sphere approximates the ground profile:
    # one sign, peaked in the middle, monotone energy descent
    model = sphere_model(n=16, q=2.5)
    rep = sphere_constrained_solve(model, tol=1e-8, max_iter=2000)
    assert rep.converged
    assert np.all(np.diff(rep.energy_trace) <= 1e-12)
    u = rep.solution.values
    assert np.all(u > 0) or np.all(u < 0)


def test_rayleigh_homogeneity(mesh16, kernel_sp):
    u = suite_with_random(mesh16, 0)[1]
    for c in (1.0, 2.5, -3.0):
        v = u * c
        ratio = gagliardo_seminorm(v, kernel_sp) / lq_norm(v, 3.0)
        base = gagliardo_seminorm(u, kernel_sp) / lq_norm(u, 3.0)
        assert ratio == pytest.approx(base, rel=1e-12)


def test_rayleigh_estimate_below_samples(mesh16, kernel_sp):
    est, minimizer, _ = rayleigh_minimize(mesh16, kernel_sp, 2.0, 3.0, n_samples=100)
    assert lq_norm(minimizer, 3.0) == pytest.approx(1.0, abs=1e-10)
    for w in suite_with_random(mesh16, 100, seed=0):
        nq = lq_norm(w, 3.0)
        if nq > 0:
            assert est <= gagliardo_seminorm(w, kernel_sp) / nq + 1e-9


def test_rayleigh_mesh_stability(kernel_sp):
    vals = [rayleigh_inf_estimate(Mesh1D(0.0, 1.0, n), kernel_sp, 2.0, 3.0)
            for n in (64, 128)]
    assert abs(vals[1] - vals[0]) / vals[0] <= 0.02


def mp_model(n=32, lam_frac=0.5, amplitude=0.1, seed=0):
    mesh = Mesh1D(0.0, 1.0, n)
    kern = standard_kernel(0.5, 2.0)
    phi = power_phi(2.0)
    src = lambda x: amplitude * np.sin(np.pi * x)
    probe = EnergyModel(phi=phi, kernel=kern, lam=1.0, q=4.0, mesh=mesh, source=src)
    c4, c5 = estimate_embedding_constants(mesh, kern, 2.0, 4.0, seed=seed)
    lam1 = lambda1_threshold(2.0, 4.0, 1.0, c4, c5, source_dual_norm(probe))
    return EnergyModel(phi=phi, kernel=kern, lam=lam_frac * lam1, q=4.0,
                       mesh=mesh, source=src), lam1


def test_mountain_pass_geometry_fields():
    model, lam1 = mp_model()
    geom = mountain_pass_geometry(model)
    assert geom.lambda1 == pytest.approx(lam1, rel=1e-12)
    assert geom.r0 == pytest.approx(geom.r0_closed_form ** (1.0 / 2.0), rel=1e-12)
    assert geom.peak_bracket_ok
    assert geom.f_peak_value > 0.0  # reaction strength below the threshold
    assert geom.energy_u1 < 0.0
    assert geom.sphere_min_estimate > max(0.0, geom.energy_u1)
    assert gagliardo_seminorm(geom.u1, model.kernel) > geom.r0


def test_mountain_pass_solve_converges():
    model, _ = mp_model()
    rep, geom = mountain_pass_solve(model, tol=1e-6, max_iter=2000)
    assert rep.converged
    assert rep.residual_trace[-1] <= 1e-6
    assert len(rep.energy_trace) == rep.iterations + 1
    assert np.all(np.diff(rep.energy_trace) <= 1e-12)  # ridge descent
    assert rep.energy_trace[-1] > 0.0 > geom.energy_u1
    res = residual_p2(rep.solution, model)
    assert res.dual_norm_estimate <= 1e-6


def test_mountain_pass_rejects_lambda_above_threshold():
    model, lam1 = mp_model()
    bad = EnergyModel(phi=model.phi, kernel=model.kernel, lam=2.0 * lam1,
                      q=model.q, mesh=model.mesh, source=model.source)
    with pytest.raises(ValueError, match="threshold"):
        mountain_pass_solve(bad, tol=1e-6, max_iter=10)


def test_mountain_pass_warns_near_threshold():
    model, lam1 = mp_model(lam_frac=0.95)
    with pytest.warns(GuardWarning, match="10%"):
        mountain_pass_solve(model, tol=1e-4, max_iter=200)


def test_mountain_pass_requires_source():
    model, _ = mp_model()
    with pytest.raises(ValueError, match="source"):
        mountain_pass_solve(model.without_source(), tol=1e-6)


def test_mountain_pass_zero_source_function_is_p1_like():
    # a present-but-zero source keeps the sourced machinery valid and makes
    # both residual notions coincide
    mesh = Mesh1D(0.0, 1.0, 16)
    model = EnergyModel(phi=power_phi(2.0), kernel=standard_kernel(0.5, 2.0),
                        lam=0.05, q=4.0, mesh=mesh,
                        source=lambda x: np.zeros_like(np.asarray(x)))
    rep, _ = mountain_pass_solve(model, tol=1e-6, max_iter=2000)
    r2 = residual_p2(rep.solution, model)
    r1 = residual_p1(rep.solution, model.without_source())
    assert r2.dual_norm_estimate == pytest.approx(r1.dual_norm_estimate, rel=1e-12,
                                                  abs=1e-15)


def test_homotopy_zero_source_constant_sequence():
    mesh = Mesh1D(0.0, 1.0, 16)
    model = EnergyModel(phi=power_phi(2.0), kernel=standard_kernel(0.5, 2.0),
                        lam=1.0, q=3.0, mesh=mesh,
                        source=lambda x: np.zeros_like(np.asarray(x)))
    rep = homotopy_to_p1(model, n_steps=3, tol=1e-5, inner_tol=1e-9)
    assert np.all(rep.extras["stage_diffs"] <= 1e-8)


def test_homotopy_guards_and_warning():
    mesh = Mesh1D(0.0, 1.0, 16)
    kern = standard_kernel(0.5, 2.0)
    ray = rayleigh_inf_estimate(mesh, kern, 2.0, 3.0)
    model = EnergyModel(phi=power_phi(2.0), kernel=kern, lam=2.0 * ray, q=3.0,
                        mesh=mesh, source=lambda x: 0.01 * np.sin(np.pi * x))
    with pytest.warns(GuardWarning, match="norm-ratio"):
        homotopy_to_p1(model, n_steps=2, tol=1e-3, inner_tol=1e-7)
    with pytest.raises(ValueError, match="steps"):
        homotopy_to_p1(model, n_steps=1)


def test_homotopy_limit_solves_homogeneous_problem():
    mesh = Mesh1D(0.0, 1.0, 32)
    kern = standard_kernel(0.5, 2.0)
    ray = rayleigh_inf_estimate(mesh, kern, 2.0, 3.0)
    model = EnergyModel(phi=power_phi(2.0), kernel=kern, lam=0.5 * ray, q=3.0,
                        mesh=mesh, source=lambda x: 0.005 * np.sin(np.pi * x))
    rep = homotopy_to_p1(model, n_steps=8, tol=1e-5, inner_tol=1e-10)
    assert rep.converged
    assert rep.extras["p1_residual"] <= 1e-5
    assert lq_norm(rep.extras["sphere_solution"], 3.0) == pytest.approx(1.0, abs=1e-10)
    assert all(rep.extras["chain_effective_lambda"])
    # the returned solution solves the homogeneous problem at the model's
    # own reaction strength after the homogeneity rescale
    res = residual_p1(rep.solution, model.without_source())
    assert res.dual_norm_estimate <= 1e-5
    assert len(rep.energy_trace) == rep.iterations + 1
