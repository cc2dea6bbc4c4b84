import math

import numpy as np
import pytest

from reluclosure.geometry import BoxDomain, HalfSpace, NoIntersection
from reluclosure.landscape import lp_loss, make_target
from reluclosure.quadrature import (Bump, Measure, NonFiniteIntegrand, SurfaceRule, TruncatedGaussian, Uniform,
                                    VolumeRule, box_cells, error_functional, hyperplane_mass, integrate_surface,
                                    integrate_volume, make_density)
from reluclosure.response import EffectiveTuple, step_response


def test_volume_of_unit_square():
    m = Measure.uniform(BoxDomain.cube(2, 0.0, 1.0))
    v, err = integrate_volume(lambda X: np.ones(len(X)), m)
    assert abs(v - 1.0) < 1e-14 and err < 1e-12


def test_smooth_integrand_1d():
    m = Measure.uniform(BoxDomain.cube(1))
    v, _ = integrate_volume(lambda X: X[:, 0] ** 2, m)
    assert abs(v - 1 / 3) < 1e-14


@pytest.mark.parametrize("kind", ["tensor-gauss", "midpoint"])
def test_rules_converge(kind):
    m = Measure.uniform(BoxDomain.cube(2))
    v, _ = integrate_volume(lambda X: np.cos(X[:, 0]) * np.exp(X[:, 1]), m, VolumeRule(kind, 64))
    exact = 2 * math.sin(1) * (math.e - 1 / math.e) / 4
    assert abs(v - exact) < (1e-12 if kind == "tensor-gauss" else 1e-3)


def test_monte_carlo_reports_standard_error():
    m = Measure.uniform(BoxDomain.cube(2))
    v, err = integrate_volume(lambda X: X[:, 0] ** 2, m, VolumeRule("monte-carlo", 20000, seed=3))
    assert abs(v - 1 / 3) < 5 * err and 0 < err < 0.01


def test_cuts_make_discontinuous_integrands_exact():
    m = Measure.uniform(BoxDomain.cube(2))
    h = HalfSpace.from_normal([1.0, 1.0], 0.2)
    f = lambda X: (X @ h.normal > h.offset).astype(float)
    v, _ = integrate_volume(f, m, VolumeRule(), [h])
    # {x + y > 0.2} cuts a right triangle with legs 1.8 from the square of area 4
    exact = 0.5 * 1.8 ** 2 / 4
    assert abs(v - exact) < 1e-13


def test_non_finite_integrand():
    m = Measure.uniform(BoxDomain.cube(1))
    with pytest.raises(NonFiniteIntegrand):
        integrate_volume(lambda X: np.full(len(X), np.nan), m)


@pytest.mark.parametrize("density", [{"kind": "truncated-gaussian", "center": 0.2, "sigma": 0.5},
                                     {"kind": "bump", "center": [0.1, -0.2], "radius": 0.8},
                                     {"kind": "uniform"}])
def test_densities_normalised(density):
    dom = BoxDomain.cube(2)
    m = Measure(dom, make_density(density, dom))
    v, _ = integrate_volume(lambda X: np.ones(len(X)), m, VolumeRule("tensor-gauss", 200))
    assert abs(v - 1.0) < 1e-6


def test_density_registry_errors():
    dom = BoxDomain.cube(1)
    with pytest.raises(ValueError):
        make_density({"kind": "cauchy"}, dom)
    with pytest.raises(ValueError):
        TruncatedGaussian(dom, 0.0, -1.0)
    with pytest.raises(ValueError):
        Bump(dom, 5.0, 0.1)
    assert isinstance(make_density(None, dom), Uniform)


def test_error_functional_step_fit():
    m = Measure.uniform(BoxDomain.cube(1))
    h = HalfSpace([1.0], 0.0)
    loss = lp_loss(make_target({"kind": "step", "normal": [1.0], "offset": 0.0, "jump": 1.0}, 1), 2)
    assert error_functional(step_response(h), loss, m) < 1e-15
    t = EffectiveTuple([[1.0]], [0.0], [0.0], 0.5)
    assert abs(error_functional(t, loss, m) - 0.25) < 1e-14


def test_surface_diagonal_length():
    m = Measure.uniform(BoxDomain.cube(2, 0.0, 1.0))
    h = HalfSpace.from_normal([1.0, -1.0], 0.0)
    assert abs(integrate_surface(lambda X: np.ones(len(X)), h, m) - math.sqrt(2)) < 1e-13


def test_surface_3d_and_point():
    m3 = Measure.uniform(BoxDomain.cube(3))
    v = integrate_surface(lambda X: np.ones(len(X)), HalfSpace([0.0, 0.0, 1.0], 0.3), m3, SurfaceRule(8))
    assert abs(v - 4.0 / 8.0) < 1e-13
    m1 = Measure.uniform(BoxDomain.cube(1))
    assert integrate_surface(lambda X: X[:, 0] + 1, HalfSpace([1.0], 0.5), m1) == pytest.approx(0.75)
    with pytest.raises(NoIntersection):
        integrate_surface(lambda X: np.ones(len(X)), HalfSpace([1.0], 1.5), m1)


def test_hyperplane_mass_small_slab():
    m = Measure.uniform(BoxDomain.cube(2))
    h = HalfSpace([1.0, 0.0], 0.0)
    assert hyperplane_mass(h, m, [0.1])[0] == pytest.approx(0.1, rel=1e-12)
    assert hyperplane_mass(h, m, [0.0]) == [0.0]
    with pytest.raises(ValueError):
        hyperplane_mass(h, m, [-1.0])


def test_box_cells_partition():
    cells = box_cells(BoxDomain.cube(2), [HalfSpace([1.0, 0.0], 0.0), HalfSpace.from_normal([1.0, 1.0], 0.0)])
    assert len(cells) == 4


def test_spec_normalisation_examples():
    m = Measure.uniform(BoxDomain.cube(2))
    v, _ = integrate_volume(lambda X: np.ones(len(X)), m, VolumeRule("tensor-gauss", 8))
    assert abs(v - 1.0) < 1e-12
    assert abs(integrate_surface(lambda X: np.ones(len(X)), HalfSpace([1.0, 0.0], 0.0), m) - 0.5) < 1e-10
    diag = HalfSpace.from_normal([1.0, 1.0], 0.0)
    assert abs(integrate_surface(lambda X: np.ones(len(X)), diag, m) - 2 * math.sqrt(2) / 4) < 1e-12


def test_gauss_exactness_per_axis():
    m = Measure.uniform(BoxDomain.cube(2, 0.0, 1.0))
    v, _ = integrate_volume(lambda X: X[:, 0] ** 7 * X[:, 1] ** 7, m, VolumeRule("tensor-gauss", 4))
    assert abs(v - 1 / 64) < 1e-15


def test_linearity_and_monotonicity(rng):
    m = Measure(BoxDomain.cube(2), make_density({"kind": "truncated-gaussian", "center": 0.3, "sigma": 0.7},
                                                BoxDomain.cube(2)))
    rule = VolumeRule("tensor-gauss", 32)
    f = lambda X: np.sin(X[:, 0]) + X[:, 1] ** 2
    g = lambda X: np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1
    vf, ef = integrate_volume(f, m, rule)
    vg, eg = integrate_volume(g, m, rule)
    vs, _ = integrate_volume(lambda X: 2 * f(X) - 3 * g(X), m, rule)
    assert abs(vs - (2 * vf - 3 * vg)) < 1e-13
    assert vf <= vg + 2 * max(ef, eg)


def test_refinement_within_error_estimate():
    m = Measure.uniform(BoxDomain.cube(2))
    f = lambda X: np.exp(-np.sum(X ** 2, axis=1))
    v1, e1 = integrate_volume(f, m, VolumeRule("tensor-gauss", 16))
    v2, _ = integrate_volume(f, m, VolumeRule("tensor-gauss", 32))
    assert abs(v2 - v1) <= e1


def test_error_functional_ignores_boundary_values():
    m = Measure.uniform(BoxDomain.cube(2))
    h = HalfSpace([1.0, 0.0], 0.25)
    loss = lp_loss(make_target({"kind": "quadratic"}, 2), 2)
    base = step_response(h, 1.0)

    class Closed:
        """Same step but counting the boundary as inside."""
        cuts = [h]

        def __call__(self, X):
            return (X @ h.normal >= h.offset).astype(float)

    assert error_functional(base, loss, m) == pytest.approx(error_functional(Closed(), loss, m), abs=1e-14)


def test_charges_plane():
    dom = BoxDomain.cube(2)
    bump = Measure(dom, make_density({"kind": "bump", "center": [0.5, 0.5], "radius": 0.3}, dom))
    from reluclosure.quadrature import charges_plane

    assert charges_plane(HalfSpace([1.0, 0.0], 0.5), bump)
    assert not charges_plane(HalfSpace([1.0, 0.0], -0.5), bump)
    assert not charges_plane(HalfSpace([1.0, 0.0], 3.0), bump)
