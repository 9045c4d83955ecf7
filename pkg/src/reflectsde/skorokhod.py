"""Discrete Skorokhod decomposition: constrain a path by minimal pushing.

Given a sampled path y with y_0 in the closed domain, the solver produces
the pair (x, k) with x = y + k on the grid, x staying in the closure, via
the projection recurrence

    x_{t_{j+1}} = project(x_{t_j} + (y_{t_{j+1}} - y_{t_j}))
    k_{t_{j+1}} = k_{t_j} + x_{t_{j+1}} - x_{t_j} - (y_{t_{j+1}} - y_{t_j}),

so k moves only when the projection clips the step, and then along an
inward normal at the projected point.  For nonconvex domains every step
must stay within the reach rho0 of the closure; the solver enforces this
with a one-percent safety margin and raises ProjectionOutOfRange otherwise.

On each grid interval the compensator increment satisfies |dk| <= |dy|
exactly, which yields the variation comparisons checked by
``check_lemma1``: over any window (t, q],

    var(k) <= var(y)      and      var(x) <= 2 var(y).
"""

import math
from dataclasses import dataclass

import numpy as np

from .driver import GridPath, CADLAG_STEP
from .errors import ProjectionOutOfRange, StartOutsideDomain
from .geometry import Domain, OUTSIDE

_REACH_MARGIN = 0.99


@dataclass(frozen=True, eq=False)
class SkorokhodSolution:
    """Constrained path x, compensator k, and running variation of k."""

    x: GridPath
    k: GridPath
    k_variation: np.ndarray

    def __post_init__(self):
        kv = np.asarray(self.k_variation, dtype=float)
        kv.flags.writeable = False
        object.__setattr__(self, "k_variation", kv)


def reflect_step(domain: Domain, x: np.ndarray, dy: np.ndarray, rho0: float):
    """One projection step: returns (x_next, dk) for the increment dy."""
    target = x + dy
    if math.isfinite(rho0):
        excursion = domain.distance_outside(target)
        if excursion >= _REACH_MARGIN * rho0:
            raise ProjectionOutOfRange(
                f"step excursion {excursion:.6g} reaches the projection "
                f"radius {rho0:.6g}"
            )
    x_next = domain.project(target)
    return x_next, x_next - target


def solve_skorokhod(domain: Domain, y: GridPath, y0=None) -> SkorokhodSolution:
    """Solve the discrete constrained decomposition for the path y.

    ``y0`` defaults to the first sample of y and must lie in the closed
    domain; passing a different value is an error.
    """
    values = y.values
    if y0 is None:
        y0 = values[0]
    start = np.asarray(y0, dtype=float)
    if not np.allclose(start, values[0], rtol=0.0, atol=1e-9):
        raise ValueError("y0 must equal the first sample of y")
    if domain.contains(start) == OUTSIDE:
        raise StartOutsideDomain(
            f"initial point {start.tolist()} is outside the closed domain"
        )
    rho0 = domain.rho0

    n = len(values)
    xs = np.empty_like(values)
    ks = np.empty_like(values)
    kvar = np.empty(n)
    xs[0] = domain.project(start)
    ks[0] = 0.0
    kvar[0] = 0.0
    x = xs[0]
    for j in range(1, n):
        dy = values[j] - values[j - 1]
        x, dk = reflect_step(domain, x, dy, rho0)
        xs[j] = x
        ks[j] = ks[j - 1] + dk
        kvar[j] = kvar[j - 1] + float(np.linalg.norm(dk))

    x_path = GridPath(y.times, xs, interp=CADLAG_STEP)
    k_path = GridPath(y.times, ks, interp=CADLAG_STEP)
    return SkorokhodSolution(x_path, k_path, kvar)


def total_variation(path: GridPath, t_from: float, t_to: float) -> float:
    """Variation of a step path over the window (t_from, t_to].

    Sums |increment| over grid times inside the window.  Window endpoints
    must satisfy 0 <= t_from <= t_to <= horizon.
    """
    t_from, t_to = float(t_from), float(t_to)
    if t_from < 0.0 or t_to > path.horizon + 1e-12 or t_from > t_to:
        raise ValueError("variation window must satisfy 0 <= t_from <= t_to <= horizon")
    times = path.times
    mask = (times > t_from) & (times <= t_to)
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        return 0.0
    increments = path.values[idx] - path.values[idx - 1]
    return float(np.sum(np.linalg.norm(increments, axis=1)))


@dataclass(frozen=True)
class IntervalCheck:
    t_from: float
    t_to: float
    y_variation: float
    k_variation: float
    x_variation: float
    k_bound_ok: bool
    x_bound_ok: bool


@dataclass(frozen=True)
class Lemma1Report:
    """Variation comparisons of a solution against its driving path."""

    intervals: tuple
    increments_ok: bool
    rel_tol: float

    @property
    def all_ok(self) -> bool:
        return self.increments_ok and all(
            c.k_bound_ok and c.x_bound_ok for c in self.intervals
        )

    def as_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "increments_ok": self.increments_ok,
            "all_ok": self.all_ok,
            "intervals": [
                {
                    "t_from": c.t_from,
                    "t_to": c.t_to,
                    "y_variation": c.y_variation,
                    "k_variation": c.k_variation,
                    "x_variation": c.x_variation,
                    "k_bound_ok": c.k_bound_ok,
                    "x_bound_ok": c.x_bound_ok,
                }
                for c in self.intervals
            ],
        }


def check_lemma1(domain: Domain, y: GridPath, sol: SkorokhodSolution,
                 intervals, rel_tol: float = 1e-9) -> Lemma1Report:
    """Check var(k) <= var(y) and var(x) <= 2 var(y) on each window.

    Also verifies the prerequisite that every y increment stays below the
    domain reach.  Tolerance is relative: a bound b is accepted up to
    b + rel_tol * (1 + b).
    """
    rho0 = domain.rho0
    increments_ok = True
    if math.isfinite(rho0):
        dy = np.diff(y.values, axis=0)
        increments_ok = bool(np.all(np.linalg.norm(dy, axis=1) < rho0))

    checks = []
    for (t_from, t_to) in intervals:
        vy = total_variation(y, t_from, t_to)
        vk = total_variation(sol.k, t_from, t_to)
        vx = total_variation(sol.x, t_from, t_to)
        slack = lambda bound: bound + rel_tol * (1.0 + bound)
        checks.append(IntervalCheck(
            float(t_from), float(t_to), vy, vk, vx,
            k_bound_ok=vk <= slack(vy),
            x_bound_ok=vx <= slack(2.0 * vy),
        ))
    return Lemma1Report(tuple(checks), increments_ok, rel_tol)
