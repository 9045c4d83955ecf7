"""Discrete constrained decomposition and its variation bounds.

The half-line solution has the closed form

    k(t) = max(0, max_{s <= t} (-y(s))),    x = y + k,

which is the running-maximum oracle used throughout.
"""

import math

import numpy as np
import pytest

from reflectsde.driver import GridPath, Partition, sample_brownian
from reflectsde.errors import ProjectionOutOfRange, StartOutsideDomain
from reflectsde.geometry import Ball, Box, ExteriorOfBall, HalfSpace
from reflectsde.skorokhod import (check_lemma1, reflect_step, solve_skorokhod,
                                  total_variation)


def half_line():
    return HalfSpace([1.0], 0.0)


def running_max_oracle(y_values):
    """Reference decomposition on [0, inf) for a 1-d sampled path."""
    y = np.asarray(y_values, dtype=float).ravel()
    k = np.maximum.accumulate(np.maximum(-y, 0.0))
    return y + k, k


def test_half_line_hand_example():
    y = GridPath(np.array([0.0, 1.0, 2.0, 3.0]),
                 np.array([0.0, -1.0, -0.5, -2.0]))
    sol = solve_skorokhod(half_line(), y)
    np.testing.assert_array_equal(sol.x.values.ravel(), [0.0, 0.0, 0.5, 0.0])
    np.testing.assert_array_equal(sol.k.values.ravel(), [0.0, 1.0, 1.0, 2.0])
    np.testing.assert_array_equal(sol.k_variation, [0.0, 1.0, 1.0, 2.0])


def test_half_line_matches_running_max_oracle():
    rng = np.random.default_rng(211)
    for _ in range(20):
        steps = 64
        y_vals = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, 0.3, steps))])
        y = GridPath(np.linspace(0.0, 1.0, steps + 1), y_vals)
        sol = solve_skorokhod(half_line(), y)
        x_ref, k_ref = running_max_oracle(y_vals)
        np.testing.assert_allclose(sol.x.values.ravel(), x_ref, atol=1e-12)
        np.testing.assert_allclose(sol.k.values.ravel(), k_ref, atol=1e-12)


def test_decomposition_identity_and_membership():
    dom = Ball([0.0, 0.0], 1.0)
    z = sample_brownian(1.0, 256, 2, seed=77)
    sol = solve_skorokhod(dom, z)
    # x = y + k at every grid point
    np.testing.assert_allclose(sol.x.values, z.values + sol.k.values,
                               atol=1e-12)
    assert np.all(np.linalg.norm(sol.x.values, axis=1) <= 1.0 + 1e-9)
    # the compensator only moves when the boundary is active
    moves = np.linalg.norm(np.diff(sol.k.values, axis=0), axis=1) > 1e-12
    on_boundary = np.linalg.norm(sol.x.values[1:], axis=1) >= 1.0 - 1e-9
    assert np.all(on_boundary[moves])


def test_interior_path_needs_no_compensator():
    dom = Box([-5.0, -5.0], [5.0, 5.0])
    z = sample_brownian(1.0, 64, 2, seed=5)
    sol = solve_skorokhod(dom, z)
    np.testing.assert_array_equal(sol.k.values, np.zeros_like(z.values))
    np.testing.assert_array_equal(sol.x.values, z.values)


def test_start_outside_domain_raises():
    y = GridPath(np.array([0.0, 1.0]), np.array([-1.0, 0.0]))
    with pytest.raises(StartOutsideDomain):
        solve_skorokhod(half_line(), y)


def test_y0_must_match_first_sample():
    y = GridPath(np.array([0.0, 1.0]), np.array([0.5, 0.0]))
    with pytest.raises(ValueError):
        solve_skorokhod(half_line(), y, y0=np.array([0.75]))


def test_reflect_step_per_step_bound():
    """One projection never produces more compensator than driver motion."""
    rng = np.random.default_rng(99)
    dom = Ball([0.0, 0.0], 1.0)
    x = np.array([1.0, 0.0])
    for _ in range(200):
        dy = rng.normal(0.0, 0.5, 2)
        x_next, dk = reflect_step(dom, x, dy, dom.rho0)
        assert np.linalg.norm(dk) <= np.linalg.norm(dy) + 1e-12
        x = x_next


def test_exterior_domain_excursion_guard():
    dom = ExteriorOfBall([0.0, 0.0], 1.0)
    x = np.array([1.0, 0.0])
    # target lands within 0.01 of the deleted ball's center: the step
    # excursion 0.995 reaches the 0.99 * rho0 margin
    with pytest.raises(ProjectionOutOfRange):
        reflect_step(dom, x, np.array([-0.995, 0.0]), dom.rho0)
    # a subcritical excursion is fine
    x_next, dk = reflect_step(dom, x, np.array([-0.5, 0.0]), dom.rho0)
    assert np.linalg.norm(x_next) == pytest.approx(1.0)


def test_total_variation_window():
    path = GridPath(np.array([0.0, 1.0, 2.0, 3.0]),
                    np.array([0.0, 1.0, -1.0, 0.5]))
    assert total_variation(path, 0.0, 3.0) == pytest.approx(4.5)
    assert total_variation(path, 1.0, 2.0) == pytest.approx(2.0)
    assert total_variation(path, 2.5, 2.75) == 0.0
    with pytest.raises(ValueError):
        total_variation(path, 2.0, 1.0)


def test_variation_bounds_on_windows():
    dom = half_line()
    z = sample_brownian(1.0, 512, 1, seed=303)
    sol = solve_skorokhod(dom, z)
    intervals = [(0.0, 0.25), (0.25, 0.5), (0.5, 1.0), (0.0, 1.0)]
    report = check_lemma1(dom, z, sol, intervals)
    assert report.all_ok
    assert report.increments_ok
    for check in report.intervals:
        assert check.k_variation <= check.y_variation * (1.0 + 1e-9) + 1e-9
        assert check.x_variation <= 2.0 * check.y_variation * (1.0 + 1e-9) + 1e-9
    payload = report.as_dict()
    assert payload["all_ok"] and len(payload["intervals"]) == 4


def test_variation_bounds_nonconvex_domain():
    dom = ExteriorOfBall([0.0, 0.0], 0.5)
    rng = np.random.default_rng(404)
    # moderate increments so each step stays below the reach
    incs = rng.normal(0.0, 0.05, (256, 2))
    vals = np.vstack([[2.0, 0.0], [2.0, 0.0] + np.cumsum(incs, axis=0)])
    y = GridPath(np.linspace(0.0, 1.0, 257), vals)
    sol = solve_skorokhod(dom, y)
    report = check_lemma1(dom, y, sol, [(0.0, 0.5), (0.5, 1.0), (0.0, 1.0)])
    assert report.increments_ok
    assert report.all_ok
