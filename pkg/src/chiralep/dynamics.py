"""Time evolution along closed loops in the (delta, omega12) plane."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .eps import closed_form_eps, refine_ep
from .model import (
    AdiabaticFrame,
    EffectiveParams,
    Handedness,
    c_product,
    eigensystem,
)

TWO_PI = 2.0 * math.pi


class PropagationError(RuntimeError):
    pass


class BranchTrackingError(RuntimeError):
    pass


class Direction(enum.Enum):
    AS_WRITTEN = "as_written"
    REVERSED = "reversed"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"cw": "as_written", "clockwise": "as_written", "ccw": "reversed",
                   "counterclockwise": "reversed", "counter_clockwise": "reversed"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class EncirclementPath:
    """Circle around (center_delta, center_omega) traversed once in ``loop_time``.

    AS_WRITTEN runs delta = c_d + r sin(2 pi t/T + phase),
    omega12 = c_w + r cos(2 pi t/T + phase), which is clockwise with delta on
    the horizontal axis; REVERSED evaluates the same curve at T - t.
    ``phase`` moves the start point (0 starts at the top of the circle) and
    ``flip_omega`` negates the cosine term, which is how mirrored paths are
    represented.
    """

    center_delta: float
    center_omega: float
    radius: float
    loop_time: float
    direction: Direction = Direction.AS_WRITTEN
    phase: float = 0.0
    flip_omega: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.loop_time > 0:
            raise ValueError("loop_time must be positive")
        object.__setattr__(self, "direction", Direction.parse(self.direction))

    @property
    def _omega_sign(self) -> float:
        return -1.0 if self.flip_omega else 1.0

    def _fraction(self, t):
        if self.direction is Direction.REVERSED:
            t = self.loop_time - t
        frac = np.asarray(t, dtype=float) / self.loop_time
        return np.where(frac >= 1.0, frac - 1.0, frac)

    def point(self, t):
        angle = TWO_PI * self._fraction(t) + self.phase
        delta = self.center_delta + self.radius * np.sin(angle)
        omega = self.center_omega + self._omega_sign * self.radius * np.cos(angle)
        if np.ndim(delta) == 0:
            return float(delta), float(omega)
        return delta, omega

    def delta_integral(self, t):
        """Integral of delta(t') over [0, t], in closed form."""
        w = TWO_PI / self.loop_time
        t = np.asarray(t, dtype=float)
        if self.direction is Direction.AS_WRITTEN:
            osc = (math.cos(self.phase) - np.cos(w * t + self.phase)) / w
        else:
            osc = (np.cos(self.phase - w * t) - math.cos(self.phase)) / w
        return self.center_delta * t + self.radius * osc

    def mirrored(self) -> "EncirclementPath":
        """Same loop reflected through omega12 = 0."""
        return replace(self, center_omega=-self.center_omega, flip_omega=not self.flip_omega)

    def reversed(self) -> "EncirclementPath":
        other = Direction.REVERSED if self.direction is Direction.AS_WRITTEN else Direction.AS_WRITTEN
        return replace(self, direction=other)

    def with_loop_time(self, loop_time: float) -> "EncirclementPath":
        return replace(self, loop_time=loop_time)


@dataclass(frozen=True)
class FixedPoint:
    """Constant (delta, omega12) held for ``loop_time``; for tests and references."""

    delta: float
    omega12: float
    loop_time: float

    def point(self, t):
        if np.ndim(t) == 0:
            return self.delta, self.omega12
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.delta), np.full_like(t, self.omega12)

    def delta_integral(self, t):
        return self.delta * np.asarray(t, dtype=float)


def path_point(path, t: float) -> tuple[float, float]:
    T = path.loop_time
    if not (0.0 <= t <= T):
        raise ValueError(f"t={t!r} outside [0, {T!r}]")
    return path.point(t)


def ep_loop(
    params: EffectiveParams,
    loop_time: float,
    direction=Direction.AS_WRITTEN,
    center: tuple[float, float] | None = None,
    radius: float | None = None,
    phase: float = 0.0,
) -> EncirclementPath:
    """Loop around the right enantiomer's EP with omega12 < 0.

    Defaults to the Newton-refined EP as center and radius |omega12_EP|, so
    the loop starts and ends with omega12 = 0.
    """
    if center is None:
        eps = closed_form_eps(params.gamma1, params.gamma2, Handedness.RIGHT)
        guess = min(eps, key=lambda p: (p.omega12, p.delta))
        ep = refine_ep(guess, params.gamma1, params.gamma2, Handedness.RIGHT, raman=params.raman)
        center = (ep.delta, ep.omega12)
    if radius is None:
        radius = abs(center[1])
    return EncirclementPath(center[0], center[1], radius, loop_time, direction, phase)


# -- Hamiltonian along a path ------------------------------------------------


def _entries(params: EffectiveParams, delta, omega):
    """Entries of H at (delta, omega12) with the decay rates of ``params``."""
    r = complex(params.raman)
    s = params.handedness.sign * omega
    h11 = -0.5j * params.gamma1
    h12 = -0.5j * r + s
    h21 = -0.5j * r.conjugate() + s
    h22 = delta - 0.5j * params.gamma2
    return h11, h12, h21, h22


def hamiltonian_at(params: EffectiveParams, path, t: float) -> np.ndarray:
    h11, h12, h21, h22 = _entries(params, *path.point(t))
    return np.array([[h11, h12], [h21, h22]], dtype=complex)


def _discriminant_along(params, path, times):
    d, w = path.point(np.asarray(times, dtype=float))
    h11, h12, h21, h22 = _entries(params, d, w)
    return (h11 - h22) ** 2 + 4.0 * h12 * h21


def _scalar_factor(params: EffectiveParams, path, t):
    """exp(-i int_0^t tr H / 2): c = factor * a, with a evolving under the traceless part."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5j * path.delta_integral(t) - 0.25 * (params.gamma1 + params.gamma2) * t)


# -- propagation -------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    bare_amplitudes: np.ndarray
    adiabatic_amplitudes: np.ndarray | None = None
    branch_labels: np.ndarray | None = None
    branch_cross_times: list = field(default_factory=list)

    @property
    def raw_norm(self) -> np.ndarray:
        return np.sum(np.abs(self.bare_amplitudes) ** 2, axis=1)

    @property
    def normalized_populations(self) -> np.ndarray:
        pops = np.abs(self.adiabatic_amplitudes) ** 2
        total = pops.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, pops / total, np.nan)


def propagate(
    params_base: EffectiveParams,
    path,
    c0,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    samples: int = 2048,
) -> Trajectory:
    """Integrate i dc/dt = H(t) c along ``path``.

    The decaying scalar exp(-i int tr H / 2) is factored out analytically and
    the traceless remainder is integrated with an adaptive 8(5,3) Runge-Kutta
    pair, so the tolerances act on amplitudes of order one rather than on
    amplitudes that have decayed by many orders of magnitude.
    """
    c0 = np.asarray(c0, dtype=complex)
    if c0.shape != (2,) or not np.any(c0):
        raise ValueError("c0 must be a nonzero 2-vector")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    if samples < 2:
        raise ValueError("need at least two samples")
    T = float(path.loop_time)
    r = complex(params_base.raman)
    sign = params_base.handedness.sign
    half_gap = 0.25 * (params_base.gamma1 - params_base.gamma2)

    def rhs(t, a):
        d, w = path.point(t)
        s = sign * w
        m11 = -0.5 * d - 1j * half_gap
        m12 = -0.5j * r + s
        m21 = -0.5j * r.conjugate() + s
        return np.array(
            [-1j * (m11 * a[0] + m12 * a[1]), -1j * (m21 * a[0] - m11 * a[1])]
        )

    times = np.linspace(0.0, T, samples)
    sol = solve_ivp(rhs, (0.0, T), c0, method="DOP853", t_eval=times,
                    rtol=rel_tol, atol=abs_tol)
    if sol.status != 0:
        raise PropagationError(f"integration failed: {sol.message}")
    a = sol.y.T
    if not np.all(np.isfinite(a)):
        raise PropagationError("non-finite amplitudes")
    factor = _scalar_factor(params_base, path, times)
    return Trajectory(times=times, bare_amplitudes=a * factor[:, None])


def rk4_reference(params_base: EffectiveParams, path, c0, steps: int, samples: int = 2):
    """Fixed-step classical RK4 on i dc/dt = H c in the bare gauge.

    Independent of ``propagate``: no gauge factor, no step control.  Returns
    ``(times, amplitudes)`` at ``samples`` equally spaced times; ``steps`` must
    be a multiple of ``samples - 1``.
    """
    if steps % (samples - 1):
        raise ValueError("steps must be a multiple of samples - 1")
    T = float(path.loop_time)
    dt = T / steps
    every = steps // (samples - 1)
    g1, g2 = params_base.gamma1, params_base.gamma2
    r = complex(params_base.raman)
    rc = r.conjugate()
    sign = params_base.handedness.sign
    point = path.point

    def f(t, x, y):
        d, w = point(t)
        s = sign * w
        return (
            -1j * (-0.5j * g1 * x + (-0.5j * r + s) * y),
            -1j * ((-0.5j * rc + s) * x + (d - 0.5j * g2) * y),
        )

    x, y = complex(c0[0]), complex(c0[1])
    out = [(x, y)]
    half = 0.5 * dt
    for n in range(steps):
        t = n * dt
        k1x, k1y = f(t, x, y)
        k2x, k2y = f(t + half, x + half * k1x, y + half * k1y)
        k3x, k3y = f(t + half, x + half * k2x, y + half * k2y)
        k4x, k4y = f(t + dt, x + dt * k3x, y + dt * k3y)
        x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y += dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if (n + 1) % every == 0:
            out.append((x, y))
    return np.linspace(0.0, T, samples), np.array(out, dtype=complex)


def gauge_transform(trajectory: Trajectory, params_base: EffectiveParams, path) -> np.ndarray:
    """a(t) = c(t) exp(-i int_0^t (i G/2 + delta/2)), G the mean decay rate.

    The integral is a trapezoid over the trajectory samples.
    """
    t = trajectory.times
    d, _ = path.point(t)
    integrand = 0.5j * params_base.mean_decay + 0.5 * np.asarray(d, dtype=complex)
    steps = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t)
    integral = np.concatenate([[0.0], np.cumsum(steps)])
    return trajectory.bare_amplitudes * np.exp(-1j * integral)[:, None]


# -- branch tracking ---------------------------------------------------------


@dataclass
class BranchTrack:
    times: np.ndarray
    roots: np.ndarray  # continuity-tracked gamma+ - gamma-
    labels: np.ndarray  # +1 where the tracked "+" state is the principal "+"
    cross_times: list
    swap: bool

    def root_at(self, params, path, t: float) -> complex:
        """Tracked square root of delta at an arbitrary time."""
        idx = int(np.clip(np.searchsorted(self.times, t), 0, len(self.times) - 1))
        if idx > 0 and abs(self.times[idx - 1] - t) < abs(self.times[idx] - t):
            idx -= 1
        ref = self.roots[idx]
        root = complex(np.sqrt(_discriminant_along(params, path, [t])[0]))
        return root if abs(root - ref) <= abs(root + ref) else -root


def track_branches(
    params_base: EffectiveParams,
    path,
    min_samples: int = 4096,
    max_depth: int = 20,
    ep_threshold: float = 1e-20,
) -> BranchTrack:
    """Follow gamma+ - gamma- continuously around ``path``.

    Consecutive samples are matched to the nearest sign of the square root;
    intervals where the root moves by more than half the local gap are
    bisected.  Returns labels relative to the principal branch, the times at
    which the principal branch cut is crossed, and whether the loop swaps the
    two eigenvalues.
    """
    T = float(path.loop_time)
    scale = params_base.gamma1 + params_base.gamma2 + abs(params_base.raman)
    grid = np.linspace(0.0, T, int(min_samples) + 1)
    deltas = _discriminant_along(params_base, path, grid)
    floor = ep_threshold * scale**2
    if np.min(np.abs(deltas)) < floor:
        raise BranchTrackingError("path passes through an exceptional point")

    def principal(t):
        return complex(np.sqrt(_discriminant_along(params_base, path, [t])[0]))

    times = [0.0]
    roots = [complex(np.sqrt(deltas[0]))]

    def advance(t_a, s_a, t_b, root_b, depth):
        s_b = root_b if abs(root_b - s_a) <= abs(root_b + s_a) else -root_b
        gap = min(abs(s_a), abs(s_b))
        if gap ** 2 < floor:
            raise BranchTrackingError("path passes through an exceptional point")
        if 0.5 * abs(s_b - s_a) > 0.5 * gap:
            if depth >= max_depth:
                raise BranchTrackingError(f"ambiguous branch matching near t={t_a:.6g}")
            t_m = 0.5 * (t_a + t_b)
            s_m = advance(t_a, s_a, t_m, principal(t_m), depth + 1)
            return advance(t_m, s_m, t_b, root_b, depth + 1)
        times.append(t_b)
        roots.append(s_b)
        return s_b

    s = roots[0]
    for k in range(1, grid.size):
        s = advance(grid[k - 1], s, grid[k], complex(np.sqrt(deltas[k])), 0)

    times = np.array(times)
    roots = np.array(roots)
    princ = np.sqrt(_discriminant_along(params_base, path, times))
    labels = np.where(np.abs(roots - princ) <= np.abs(roots + princ), 1, -1)

    cross = []
    for k in np.nonzero(labels[1:] != labels[:-1])[0]:
        cross.append(_locate_cut(params_base, path, times[k], times[k + 1], roots[k]))
    swap = bool(abs(roots[-1] + roots[0]) < abs(roots[-1] - roots[0]))
    return BranchTrack(times, roots, labels, cross, swap)


def _locate_cut(params, path, t_a, t_b, root_a, iterations=40):
    """Bisect for the time where the principal root jumps sign."""

    def principal(t):
        return complex(np.sqrt(_discriminant_along(params, path, [t])[0]))

    ref_a = principal(t_a)
    for _ in range(iterations):
        t_m = 0.5 * (t_a + t_b)
        p = principal(t_m)
        if abs(p - ref_a) <= abs(p + ref_a):
            t_a, ref_a = t_m, p
        else:
            t_b = t_m
    return 0.5 * (t_a + t_b)


# -- projection and experiments ---------------------------------------------


def project_adiabatic(c, frame: AdiabaticFrame, label: int = 1) -> tuple[complex, complex]:
    """Adiabatic amplitudes (a+, a-) of ``c`` by c-product with the left vectors.

    ``label = -1`` means the continuity-tracked "+" state is the frame's
    principal "-" state, so the two are exchanged.
    """
    if frame.at_ep:
        raise ValueError("cannot project onto a coalesced frame")
    a_plus = c_product(frame.psi_plus, c)
    a_minus = c_product(frame.psi_minus, c)
    if label == -1:
        return a_minus, a_plus
    return a_plus, a_minus


class InitialState(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    MIXED = "mixed"


class FinalState(enum.Enum):
    PLUS = "Plus"
    MINUS = "Minus"


@dataclass
class EncirclementResult:
    trajectory: Trajectory
    final_pop_plus_norm: float
    final_pop_minus_norm: float
    final_pop_plus_raw: float
    final_pop_minus_raw: float
    eigenvalue_swap: bool
    dominant_final_state: FinalState
    nad_times: list = field(default_factory=list)

    @property
    def raw_total(self) -> float:
        return self.final_pop_plus_raw + self.final_pop_minus_raw

    def summary(self) -> dict:
        return {
            "final_pop_plus_norm": self.final_pop_plus_norm,
            "final_pop_minus_norm": self.final_pop_minus_norm,
            "final_pop_plus_raw": self.final_pop_plus_raw,
            "final_pop_minus_raw": self.final_pop_minus_raw,
            "eigenvalue_swap": self.eigenvalue_swap,
            "dominant_final_state": self.dominant_final_state.value,
            "branch_cross_times": list(self.trajectory.branch_cross_times),
            "nad_times": list(self.nad_times),
        }


def _initial_vector(frame: AdiabaticFrame, initial) -> np.ndarray:
    if isinstance(initial, (str, InitialState)):
        initial = InitialState(initial.value if isinstance(initial, InitialState) else initial.lower())
        if initial is InitialState.PLUS:
            return frame.phi_plus
        if initial is InitialState.MINUS:
            return frame.phi_minus
        return (frame.phi_plus + frame.phi_minus) / math.sqrt(2.0)
    return np.asarray(initial, dtype=complex)


def run_encirclement(
    params_base: EffectiveParams,
    path,
    initial=InitialState.PLUS,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    samples: int = 2048,
    min_samples: int = 4096,
) -> EncirclementResult:
    """Propagate one loop and read off the adiabatic populations.

    Along the trajectory the adiabatic amplitudes follow the continuity-tracked
    labels.  Final populations are taken in the frame at t = T labelled by the
    principal branch; the loop is closed, so this is the initial frame and
    "Plus" means the state the principal labelling calls phi+ at the start.
    """
    h0 = hamiltonian_at(params_base, path, 0.0)
    frame0 = eigensystem(h0)
    if frame0.at_ep:
        raise ValueError("loop starts at an exceptional point")
    c0 = _initial_vector(frame0, initial)
    traj = propagate(params_base, path, c0, rel_tol, abs_tol, samples)
    track = track_branches(params_base, path, min_samples)

    adiabatic = np.empty((traj.times.size, 2), dtype=complex)
    labels = np.empty(traj.times.size, dtype=int)
    for k, t in enumerate(traj.times):
        h = hamiltonian_at(params_base, path, t)
        frame = eigensystem(h)
        root = track.root_at(params_base, path, t)
        label = 1 if abs(root - frame.split) <= abs(root + frame.split) else -1
        adiabatic[k] = project_adiabatic(traj.bare_amplitudes[k], frame, label)
        labels[k] = label
    traj.adiabatic_amplitudes = adiabatic
    traj.branch_labels = labels
    traj.branch_cross_times = list(track.cross_times)

    frame_end = eigensystem(hamiltonian_at(params_base, path, traj.times[-1]))
    a_plus, a_minus = project_adiabatic(traj.bare_amplitudes[-1], frame_end)
    raw_plus, raw_minus = abs(a_plus) ** 2, abs(a_minus) ** 2
    total = raw_plus + raw_minus
    p_plus = raw_plus / total if total > 0 else float("nan")
    p_minus = raw_minus / total if total > 0 else float("nan")

    pops = traj.normalized_populations
    lead = np.sign(pops[:, 0] - 0.5)
    nad = [float(0.5 * (traj.times[k] + traj.times[k + 1]))
           for k in np.nonzero(lead[1:] * lead[:-1] < 0)[0]]

    return EncirclementResult(
        trajectory=traj,
        final_pop_plus_norm=float(p_plus),
        final_pop_minus_norm=float(p_minus),
        final_pop_plus_raw=float(raw_plus),
        final_pop_minus_raw=float(raw_minus),
        eigenvalue_swap=track.swap,
        dominant_final_state=FinalState.PLUS if p_plus >= p_minus else FinalState.MINUS,
        nad_times=nad,
    )


@dataclass(frozen=True)
class LoopSweepRow:
    loop_time: float
    direction: Direction
    handedness: Handedness
    pop_plus_norm: float
    pop_minus_norm: float
    pop_plus_raw: float
    pop_minus_raw: float
    eigenvalue_swap: bool
    dominant_final_state: str
    error: str = ""


def _sweep_job(job):
    params, path, initial, rel_tol, abs_tol, samples = job
    try:
        res = run_encirclement(params, path, initial, rel_tol, abs_tol, samples=samples)
    except (PropagationError, BranchTrackingError, ValueError) as exc:
        nan = float("nan")
        return LoopSweepRow(path.loop_time, path.direction, params.handedness,
                            nan, nan, nan, nan, False, "", f"{type(exc).__name__}: {exc}")
    return LoopSweepRow(
        path.loop_time, path.direction, params.handedness,
        res.final_pop_plus_norm, res.final_pop_minus_norm,
        res.final_pop_plus_raw, res.final_pop_minus_raw,
        res.eigenvalue_swap, res.dominant_final_state.value,
    )


def loop_time_sweep(
    params_base: EffectiveParams,
    path_template: EncirclementPath,
    loop_times,
    initial=InitialState.PLUS,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    samples: int = 256,
    workers: int | None = None,
) -> list[LoopSweepRow]:
    """Final populations for every (T, enantiomer, direction).

    Row order is T ascending, then R before L, then AS_WRITTEN before
    REVERSED, whatever the number of workers.  Failed rows carry ``error``.
    """
    loop_times = [float(t) for t in loop_times]
    if any(t <= 0 for t in loop_times):
        raise ValueError("loop times must be positive")
    jobs = []
    for T in sorted(loop_times):
        for hand in (Handedness.RIGHT, Handedness.LEFT):
            for direction in (Direction.AS_WRITTEN, Direction.REVERSED):
                path = replace(path_template, loop_time=T, direction=direction)
                params = params_base.with_(handedness=hand)
                jobs.append((params, path, initial, rel_tol, abs_tol, samples))
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_sweep_job, jobs))
    return [_sweep_job(job) for job in jobs]


def winding_number(path, point: tuple[float, float], samples: int = 4096) -> int:
    """How many times ``path`` winds around ``point`` (counter-clockwise positive)."""
    t = np.linspace(0.0, path.loop_time, samples + 1)
    d, w = path.point(t)
    z = (np.asarray(d) - point[0]) + 1j * (np.asarray(w) - point[1])
    turns = np.sum(np.angle(z[1:] / z[:-1])) / TWO_PI
    return int(round(turns))


__all__ = [
    "Direction", "EncirclementPath", "FixedPoint", "Trajectory", "EncirclementResult",
    "InitialState", "FinalState", "LoopSweepRow", "BranchTrack",
    "PropagationError", "BranchTrackingError",
    "path_point", "ep_loop", "hamiltonian_at", "propagate", "rk4_reference",
    "gauge_transform", "track_branches", "project_adiabatic", "run_encirclement",
    "loop_time_sweep", "winding_number",
]
