import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.capacity import (
    CompactSet1D,
    DiscreteMeasure,
    capacity_estimate,
    capacity_minimize,
    necessary_condition_probe,
)
from fracvar.functionals import EnergyModel
from fracvar.kernels import power_phi, standard_kernel
from fracvar.mesh import GridFunction, Mesh1D


def test_compact_set_validation():
    with pytest.raises(ValueError):
        CompactSet1D(((0.5, 0.4),))
    with pytest.raises(ValueError):
        CompactSet1D(((0.1, 0.3), (0.2, 0.5)))  # overlap
    k = CompactSet1D.of(0.5, (0.7, 0.8))
    assert k.contains(0.5) and k.contains(0.75) and not k.contains(0.6)
    assert CompactSet1D.of((0.45, 0.55)).issubset(CompactSet1D.of((0.4, 0.6)))
    assert k.describe() == "0.5:0.5;0.7:0.8"


def test_measure_validation_and_mass():
    m = Mesh1D(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        DiscreteMeasure(atoms=((0.5, -1.0),))
    dens = GridFunction(m, np.full(7, 2.0))
    mu = DiscreteMeasure(atoms=((0.5, 1.5), (0.9, 0.25)), density=dens)
    region = CompactSet1D.of((0.25, 0.75))
    # atom at 0.5 inside, atom at 0.9 outside, density 2 over width 0.5
    # minus the linear ramps near the region ends (density is pw-linear)
    assert mu.mass_on(region) == pytest.approx(1.5 + 1.0, rel=1e-12)


def test_empty_set_capacity_zero(kernel_sp):
    m = Mesh1D(0.0, 1.0, 16)
    assert capacity_estimate(CompactSet1D.empty(), m, kernel_sp, 2.0) == 0.0


def test_capacity_requires_set_inside_domain(kernel_sp):
    m = Mesh1D(0.0, 1.0, 16)
    with pytest.raises(ValueError):
        capacity_estimate(CompactSet1D.of((0.0, 0.2)), m, kernel_sp, 2.0)
    with pytest.raises(ValueError):
        capacity_estimate(CompactSet1D.of((0.9, 1.5)), m, kernel_sp, 2.0)


def test_capacity_monotone_under_inclusion(kernel_sp):
    m = Mesh1D(0.0, 1.0, 32)
    nested = [CompactSet1D.of(0.5), CompactSet1D.of((0.45, 0.55)),
              CompactSet1D.of((0.4, 0.6)), CompactSet1D.of((0.3, 0.7))]
    vals = [capacity_estimate(k, m, kernel_sp, 2.0) for k in nested]
    assert all(a <= b + 1e-10 for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0.0


def test_capacity_minimizer_constraints_exact(kernel_sp):
    m = Mesh1D(0.0, 1.0, 32)
    region = CompactSet1D.of((0.4, 0.6))
    rep = capacity_minimize(region, m, kernel_sp, 2.0)
    assert rep.converged
    phi = rep.minimizer.values
    assert np.all(phi >= 0.0) and np.all(phi <= 1.0)
    assert np.all(phi[region.node_indices(m)] == 1.0)
    assert np.all(np.diff(rep.objective_trace) <= 0.0)


def test_capacity_generic_exponent_path(kernel_sp):
    m = Mesh1D(0.0, 1.0, 16)
    region = CompactSet1D.of((0.4, 0.6))
    v2 = capacity_minimize(region, m, kernel_sp, 2.5, max_iter=5000)
    assert v2.converged
    assert np.all(np.diff(v2.objective_trace) <= 0.0)
    phi = v2.minimizer.values
    assert np.all(phi >= 0.0) and np.all(phi <= 1.0)


def test_capacity_refinement_stability(kernel_sp):
    region = CompactSet1D.of((0.4, 0.6))
    vals = [capacity_estimate(region, Mesh1D(0.0, 1.0, n), kernel_sp, 2.0)
            for n in (64, 128)]
    assert abs(vals[1] - vals[0]) / vals[0] <= 0.05


@given(st.floats(0.1, 0.35), st.floats(0.05, 0.2))
@settings(max_examples=10)
def test_capacity_monotone_property(lo, width):
    m = Mesh1D(0.0, 1.0, 16)
    k = standard_kernel(0.5, 2.0)
    inner = CompactSet1D.of((lo, lo + width))
    outer = CompactSet1D.of((lo - 0.05, lo + width + 0.05))
    ci = capacity_estimate(inner, m, k, 2.0, tol=1e-6)
    co = capacity_estimate(outer, m, k, 2.0, tol=1e-6)
    assert ci <= co + 1e-8


def probe_model(n=32):
    mesh = Mesh1D(0.0, 1.0, n)
    # the probe needs exponents 2 < p < q
    return EnergyModel(phi=power_phi(2.5), kernel=standard_kernel(0.5, 2.5),
                       lam=1.0, q=3.2, mesh=mesh)


def test_probe_requires_p_above_two():
    mesh = Mesh1D(0.0, 1.0, 16)
    model = EnergyModel(phi=power_phi(2.0), kernel=standard_kernel(0.5, 2.0),
                        lam=1.0, q=3.0, mesh=mesh)
    u = GridFunction.zero(mesh)
    with pytest.raises(ValueError, match="2 < p < q"):
        necessary_condition_probe(u, model, DiscreteMeasure(), CompactSet1D.of(0.5))


def test_probe_zero_measure_compatible():
    model = probe_model()
    u = GridFunction.from_callable(model.mesh, lambda x: np.sin(np.pi * x))
    rep = necessary_condition_probe(u, model, DiscreteMeasure(),
                                    CompactSet1D.of((0.4, 0.6)))
    assert rep.mass == 0.0
    assert rep.compatible
    assert rep.min_bound > 0.0
    # family norms decrease toward the capacity root
    norms = rep.bounds[:, 0]
    assert norms[-1] == np.min(norms)
    assert norms[-1] == pytest.approx(rep.capacity_value ** (1.0 / model.q), rel=1e-12)


def test_probe_atom_incompatible_when_bound_small():
    model = probe_model()
    u = GridFunction.from_callable(model.mesh, lambda x: 0.01 * np.sin(np.pi * x))
    region = CompactSet1D.of(0.5)
    heavy = DiscreteMeasure(atoms=((0.5, 1e6),))
    rep = necessary_condition_probe(u, model, heavy, region)
    assert not rep.compatible
    assert rep.mass > rep.min_bound
    light = DiscreteMeasure(atoms=((0.5, rep.min_bound * 0.5),))
    rep2 = necessary_condition_probe(u, model, light, region)
    assert rep2.compatible


def test_probe_density_measure_compatible_on_model():
    model = probe_model()
    u = GridFunction.from_callable(model.mesh, lambda x: 0.05 * np.sin(np.pi * x))
    dens = GridFunction.from_callable(model.mesh,
                                      lambda x: 0.01 * np.sin(np.pi * x) ** 2)
    mu = DiscreteMeasure(density=dens)
    for region in (CompactSet1D.of((0.4, 0.6)), CompactSet1D.of((0.2, 0.3)),
                   CompactSet1D.of(0.5)):
        rep = necessary_condition_probe(u, model, mu, region)
        assert rep.compatible


def test_probe_scales_with_constants():
    model = probe_model(n=16)
    u = GridFunction.from_callable(model.mesh, lambda x: np.sin(np.pi * x))
    region = CompactSet1D.of((0.4, 0.6))
    r1 = necessary_condition_probe(u, model, DiscreteMeasure(), region, c6=1.0, c7=1.0)
    r2 = necessary_condition_probe(u, model, DiscreteMeasure(), region, c6=2.0, c7=2.0)
    assert r2.min_bound == pytest.approx(2.0 * r1.min_bound, rel=1e-12)
