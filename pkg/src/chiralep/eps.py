"""Exceptional points of the effective model: closed form, Newton refinement, maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import EffectiveParams, Handedness, discriminant

# Grid maps clamp log10 of the eigenvalue gap here so exact zeros stay finite.
LOG_GAP_FLOOR = -16.0

AXES = ("gamma1", "gamma2", "delta", "omega12")


class EPNotConverged(RuntimeError):
    """Refinement failed; ``best`` holds the best iterate found."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class EPPoint:
    delta: float
    omega12: float
    handedness: Handedness
    residual: float
    branch_index: int

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.delta, self.omega12])


def _params(gamma1, gamma2, handedness, delta=0.0, omega12=0.0, raman=None):
    return EffectiveParams(gamma1, gamma2, delta, omega12, raman, Handedness.parse(handedness))


def closed_form_eps(gamma1: float, gamma2: float, handedness=Handedness.RIGHT):
    """Both EPs in the (delta, omega12) plane for the default Raman coupling.

    delta = 0 requires Delta**2 + 4 W**2 = ((G1+G2)/2)**2 and
    Delta (G1 - G2) = 4 W sqrt(G1 G2) for the right enantiomer, giving
    (+-sqrt(G1 G2), +-(G1 - G2)/4) with matched signs.  The left enantiomer
    mirrors omega12.
    """
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("decay rates must be non-negative")
    if gamma1 == 0 and gamma2 == 0:
        raise ValueError("no exceptional points in the Hermitian limit")
    handedness = Handedness.parse(handedness)
    root = math.sqrt(gamma1 * gamma2)
    quarter = 0.25 * (gamma1 - gamma2) * handedness.sign
    points = []
    for branch, sign in enumerate((1.0, -1.0)):
        delta, omega = sign * root + 0.0, sign * quarter + 0.0
        res = abs(discriminant(_params(gamma1, gamma2, handedness, delta, omega)))
        points.append(EPPoint(delta, omega, handedness, res, branch))
    return tuple(points)


def _jacobian(params: EffectiveParams) -> np.ndarray:
    """d(Re delta, Im delta)/d(Delta, Omega12) from the polynomial form."""
    s = params.handedness.sign
    d_delta = 2.0 * (params.delta + 1j * params.half_difference)
    d_omega = 8.0 * params.omega12 - 4j * s * complex(params.raman).real
    return np.array([[d_delta.real, d_omega.real], [d_delta.imag, d_omega.imag]])


def refine_ep(
    guess: EPPoint | tuple[float, float],
    gamma1: float,
    gamma2: float,
    handedness=Handedness.RIGHT,
    tolerance: float | None = None,
    raman: complex | None = None,
    max_newton: int = 50,
    max_simplex: int = 500,
    max_displacement: float | None = None,
) -> EPPoint:
    """Newton iteration on (Re delta, Im delta) with a Nelder-Mead fallback.

    Iterates that wander further than ``max_displacement`` (default
    G1 + G2) from the guess count as leaving the basin.
    """
    handedness = Handedness.parse(handedness)
    scale = gamma1 + gamma2
    if scale <= 0:
        raise ValueError("refine_ep needs a non-Hermitian model")
    if tolerance is None:
        tolerance = 1e-12 * scale**2
    if max_displacement is None:
        max_displacement = scale
    if isinstance(guess, EPPoint):
        start = guess.coords
        branch = guess.branch_index
    else:
        start = np.asarray(guess, dtype=float)
        branch = 0 if start[0] >= 0 else 1

    def residual(x):
        return discriminant(_params(gamma1, gamma2, handedness, x[0], x[1], raman))

    x = start.copy()
    best = x.copy()
    best_res = abs(residual(x))

    def point(x, res):
        return EPPoint(float(x[0]), float(x[1]), handedness, float(res), branch)

    if best_res <= tolerance:
        return point(best, best_res)

    for _ in range(max_newton):
        r = residual(x)
        jac = _jacobian(_params(gamma1, gamma2, handedness, x[0], x[1], raman))
        if abs(np.linalg.det(jac)) <= 1e-12 * np.abs(jac).max() ** 2:
            break
        x = x - np.linalg.solve(jac, [r.real, r.imag])
        if np.linalg.norm(x - start) > max_displacement:
            raise EPNotConverged("Newton iterate left the basin", point(best, best_res))
        res = abs(residual(x))
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tolerance:
            return point(x, res)

    # Jacobian singular or slow: descend on |delta|^2 in scaled coordinates
    def objective(y):
        return abs(residual(best + y * scale)) ** 2 / scale**4

    out = minimize(
        objective,
        np.zeros(2),
        method="Nelder-Mead",
        options={"maxiter": max_simplex, "xatol": 1e-15, "fatol": 1e-30},
    )
    cand = best + out.x * scale
    res = abs(residual(cand))
    if res < best_res and np.linalg.norm(cand - start) <= max_displacement:
        best, best_res = cand, res
    if best_res <= tolerance:
        return point(best, best_res)
    raise EPNotConverged(
        f"no EP within tolerance {tolerance:.3g} (best |delta| = {best_res:.3g})",
        point(best, best_res),
    )


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    gamma2: float
    handedness: Handedness
    branch: int
    delta_ep: float
    omega12_ep: float
    residual: float
    refined: bool


def ratio_sweep(gamma1: float, ratios) -> list[SweepRow]:
    """EPs of both enantiomers for G2 = R G1 over a list of ratios.

    Each closed-form point is checked by ``refine_ep``; rows whose check
    fails are kept and flagged with ``refined=False``.
    """
    ratios = [float(r) for r in ratios]
    if any(not math.isfinite(r) or r < 0 for r in ratios):
        raise ValueError("ratios must be finite and non-negative")
    rows = []
    for ratio in sorted(ratios):
        gamma2 = ratio * gamma1
        for hand in (Handedness.RIGHT, Handedness.LEFT):
            for ep in closed_form_eps(gamma1, gamma2, hand):
                try:
                    refined = refine_ep(ep, gamma1, gamma2, hand)
                    ok = np.linalg.norm(refined.coords - ep.coords) < 1e-10 * (gamma1 + gamma2)
                except EPNotConverged:
                    ok = False
                rows.append(
                    SweepRow(ratio, gamma2, hand, ep.branch_index, ep.delta, ep.omega12, ep.residual, ok)
                )
    return rows


def log_gap(params: EffectiveParams) -> float:
    gap = math.sqrt(abs(discriminant(params)))
    if gap == 0:
        return LOG_GAP_FLOOR
    return max(math.log10(gap), LOG_GAP_FLOOR)


def grid_map(
    base: EffectiveParams,
    x_axis: str,
    x_values,
    y_axis: str,
    y_values,
) -> dict:
    """log10 |gamma+ - gamma-| for both enantiomers over any two of AXES.

    Returns a dict with the axis values and two arrays of shape
    (len(x_values), len(y_values)), keyed "R" and "L".
    """
    if x_axis not in AXES or y_axis not in AXES or x_axis == y_axis:
        raise ValueError(f"axes must be two distinct names from {AXES}")
    xs = np.asarray(x_values, dtype=float)
    ys = np.asarray(y_values, dtype=float)
    maps = {}
    for hand in (Handedness.RIGHT, Handedness.LEFT):
        out = np.empty((xs.size, ys.size))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                changes = {x_axis: float(x), y_axis: float(y), "handedness": hand}
                if "gamma1" in changes or "gamma2" in changes:
                    g1 = changes.get("gamma1", base.gamma1)
                    g2 = changes.get("gamma2", base.gamma2)
                    changes["raman"] = math.sqrt(g1 * g2)
                out[i, j] = log_gap(base.with_(**changes))
        maps[hand.value] = out
    return {"x_axis": x_axis, "y_axis": y_axis, "x": xs, "y": ys, **maps}


def eigengap_map(gamma1, gamma2, delta_range, omega_range) -> dict:
    """Eigenvalue-gap map in the (delta, omega12) plane.

    Ranges are ``(lo, hi, count)`` triples with count >= 2.
    """
    for lo, hi, count in (delta_range, omega_range):
        if count < 2 or not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("ranges need finite bounds and at least 2 nodes")
    base = EffectiveParams(gamma1, gamma2)
    return grid_map(
        base,
        "delta",
        np.linspace(*delta_range[:2], int(delta_range[2])),
        "omega12",
        np.linspace(*omega_range[:2], int(omega_range[2])),
    )


def response_scaling_probe(
    ep: EPPoint,
    gamma1: float,
    gamma2: float,
    direction=(1.0, 0.0),
    epsilons=None,
    raman: complex | None = None,
) -> float:
    """Slope of log|gamma+ - gamma-| against log(eps) along a ray from ``ep``.

    Close to a second-order EP the slope is 1/2; at a Hermitian crossing it is 1.
    """
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / norm
    scale = gamma1 + gamma2 or 1.0
    if epsilons is None:
        epsilons = np.geomspace(1e-6, 1e-4, 21) * scale
    epsilons = np.asarray(epsilons, dtype=float)
    if np.any(epsilons <= 0) or epsilons.max() / epsilons.min() < 100:
        raise ValueError("epsilons must be positive and span at least two decades")
    gaps = []
    for eps in epsilons:
        d, w = ep.coords + eps * direction
        p = _params(gamma1, gamma2, ep.handedness, d, w, raman)
        gaps.append(math.sqrt(abs(discriminant(p))))
    gaps = np.array(gaps)
    floor = 1e-13 * max(scale, float(np.abs(ep.coords).max()))
    if np.any(gaps <= floor):
        raise ValueError("gap stays below the noise floor along this direction")
    slope, _ = np.polyfit(np.log(epsilons), np.log(gaps), 1)
    return float(slope)
