import math

import numpy as np
import pytest

from indexcurv.geometry import ProductSpace, SplitPatch, SpherePatch4, sphere_surface, torus_surface
from indexcurv.morse import (AreaSampler, CallableFunction, Direction, FunctionSpace, HeightFunctions,
                             make_combined, restrict_height, sample_directions, sample_dummy_points,
                             stream)


def test_streams_are_reproducible_and_distinct():
    a = stream(5, 1, 0).random(4)
    assert np.array_equal(a, stream(5, 1, 0).random(4))
    assert not np.array_equal(a, stream(5, 1, 1).random(4))
    assert not np.array_equal(a, stream(6, 1, 0).random(4))


def test_directions_are_uniform_unit_vectors():
    A = sample_directions(stream(0, 9), 3, 200_000)
    assert np.allclose(np.linalg.norm(A, axis=1), 1.0)
    # E[a] = 0, E[a a^T] = I/3 to Monte Carlo accuracy
    assert np.abs(A.mean(0)).max() < 5 * math.sqrt(1 / 3 / 200_000)
    assert np.abs(A.T @ A / len(A) - np.eye(3) / 3).max() < 0.005
    with pytest.raises(ValueError):
        Direction(np.array([1.0, 1.0, 0.0]))


def test_height_derivatives_match_finite_differences():
    surf = torus_surface(2.0, 1.0)
    A = sample_directions(stream(1, 2), 3, 5)
    h = HeightFunctions(surf.chart, A)
    P = np.array([[0.3, 1.1], [2.0, 4.0], [5.5, 0.2], [1.0, 1.0], [3.0, 2.5]])
    i = np.arange(5)
    e = 1e-6
    for k in range(2):
        d = np.zeros(2)
        d[k] = e
        fd = (h.value(P + d, i) - h.value(P - d, i)) / (2 * e)
        assert np.allclose(h.grad(P, i)[:, k], fd, atol=1e-8)
        fd2 = (h.grad(P + d, i) - h.grad(P - d, i)) / (2 * e)
        assert np.allclose(h.hess(P, i)[:, :, k], fd2, atol=1e-6)


def test_restrict_height_and_callable():
    surf = sphere_surface()
    h = restrict_height(Direction(np.array([0.0, 0.0, 1.0])), surf)
    assert float(h.value(np.array([0.0, 0.5 * math.pi]))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        restrict_height(np.array([1.0, 0.0]), surf)
    f = CallableFunction(lambda P: (P[..., 0] - 1) ** 2 + 3 * P[..., 1] ** 2)
    assert f.grad(np.array([0.0, 1.0])) == pytest.approx([-2.0, 6.0], abs=1e-6)
    assert f.hess(np.array([0.0, 0.0])) == pytest.approx(np.diag([2.0, 6.0]), abs=1e-4)


def test_area_sampler_uniform_on_sphere():
    surf = sphere_surface()
    P = AreaSampler(surf).sample(stream(3, 1), 100_000)
    z = surf.chart.embed(P)[:, 2]
    # uniform area: z is uniform on [-1, 1] (Archimedes)
    assert abs(np.mean(z > 0.5) - 0.25) < 5 * math.sqrt(0.25 * 0.75 / 1e5)
    assert abs(np.mean(z)) < 5 * math.sqrt(1 / 3 / 1e5)


def test_combined_function_is_block_sum():
    space = ProductSpace([sphere_surface(), torus_surface()])
    rng = stream(4, 1)
    n = 6
    A = [sample_directions(rng, space.ambient_dim, n) for _ in range(2)]
    W = sample_dummy_points(stream(4, 2), space, 2, n)
    f = make_combined(A, W, space)
    Z = np.concatenate([AreaSampler(fac).sample(rng, n) for fac in space.factors], 1)
    i = np.arange(n)
    assert np.allclose(f.value(Z, i), f.direct_value(Z, i), atol=1e-13)
    H = f.full_hessian(Z, i)
    # block separable: the off-diagonal 2x2 blocks vanish
    assert np.abs(H[:, :2, 2:]).max() < 1e-6


def test_combined_on_s4patch():
    space = SplitPatch(SpherePatch4(0.2))
    n = 4
    A = [sample_directions(stream(8, k), 5, n) for k in range(2)]
    W = sample_dummy_points(stream(8, 5), space, 2, n)
    f = make_combined(A, W, space)
    Z = 0.1 * (stream(8, 6).random((n, 4)) - 0.5)
    i = np.arange(n)
    assert np.allclose(f.value(Z, i), f.direct_value(Z, i), atol=1e-13)
    with pytest.raises(ValueError):
        make_combined(A[:1], W[:1], space)


def test_function_space_record():
    fs = FunctionSpace("combined", 5, 2)
    assert fs.d == 2 and "Philox" in fs.rng
