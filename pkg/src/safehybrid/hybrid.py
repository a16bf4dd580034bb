"""Hybrid automaton simulation: event-detected guard crossings and affine resets.

Continuous flow is integrated with fixed-step RK4 under zero-order-hold
control. Guard crossings are localized by bisection on the guard function
over the offending step, the affine reset is applied, and integration
resumes in the new mode for the remaining step time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AmbiguousEvent, NoValidMode

GUARD_TOL = 1e-10       # |g| at a localized crossing
BISECT_MAX_ITER = 100
MAX_EVENTS_PER_STEP = 32
EVENT_TIME_TOL = 1e-12  # two guards within this window -> ambiguous
DOMAIN_TOL = 1e-9

DECREASING = "decreasing"
INCREASING = "increasing"

DynamicsFn = Callable[[int, np.ndarray, np.ndarray], np.ndarray]
PolicyFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AffineResetMap:
    """s' = M s + p."""

    M: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.M.ndim != 2 or self.M.shape[0] != self.M.shape[1]:
            raise ValueError("reset matrix M must be square")
        if self.p.shape != (self.M.shape[0],):
            raise ValueError("reset offset p has wrong shape")
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.p))):
            raise ValueError("reset map entries must be finite")

    def apply(self, state: np.ndarray) -> np.ndarray:
        return self.M @ np.asarray(state, dtype=float) + self.p


def apply_reset(reset: AffineResetMap, state: np.ndarray) -> np.ndarray:
    """Apply an affine reset map to a state."""
    return reset.apply(state)


@dataclass(frozen=True)
class GuardedTransition:
    """Transition fired when guard_normal·s - guard_offset crosses zero in
    the declared direction."""

    from_mode: int
    to_mode: int
    guard_normal: np.ndarray
    guard_offset: float
    crossing_direction: str
    reset: AffineResetMap

    def __post_init__(self):
        object.__setattr__(self, "guard_normal", np.asarray(self.guard_normal, dtype=float))
        if self.crossing_direction not in (DECREASING, INCREASING):
            raise ValueError(f"bad crossing_direction {self.crossing_direction!r}")
        if not np.any(self.guard_normal != 0.0):
            raise ValueError("guard_normal must be nonzero")

    def guard_value(self, state: np.ndarray) -> float:
        return float(self.guard_normal @ state - self.guard_offset)

    def crosses(self, g0: float, g1: float) -> bool:
        if self.crossing_direction == DECREASING:
            return g0 >= 0.0 and g1 < 0.0
        return g0 <= 0.0 and g1 > 0.0


@dataclass(frozen=True)
class HybridAutomaton:
    """Black-box hybrid system: per-mode ODEs, guarded affine resets,
    box state domains, box control set and box-uniform initial distribution.

    ``dynamics(mode, state, control)`` is sampled, never inspected.
    ``initial_mode`` may be an int or a callable state -> mode, for systems
    whose initial box straddles a guard surface.
    """

    n: int
    m: int
    mode_domains: tuple  # tuple of (n, 2) arrays: per-coordinate [lo, hi]
    dynamics: DynamicsFn
    transitions: tuple
    control_lo: np.ndarray
    control_hi: np.ndarray
    initial_lo: np.ndarray
    initial_hi: np.ndarray
    initial_mode: object = 0

    def __post_init__(self):
        doms = tuple(np.asarray(b, dtype=float) for b in self.mode_domains)
        object.__setattr__(self, "mode_domains", doms)
        object.__setattr__(self, "transitions", tuple(self.transitions))
        for name in ("control_lo", "control_hi", "initial_lo", "initial_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for b in doms:
            if b.shape != (self.n, 2):
                raise ValueError("mode domain box has wrong shape")
            if np.any(b[:, 1] < b[:, 0]) or np.any(b[:, 1] == b[:, 0]):
                raise ValueError("mode domain boxes must be non-degenerate")
        for t in self.transitions:
            if not (0 <= t.from_mode < len(doms) and 0 <= t.to_mode < len(doms)):
                raise ValueError("transition references unknown mode")
            if t.guard_normal.shape != (self.n,):
                raise ValueError("guard normal has wrong dimension")

    @property
    def num_modes(self) -> int:
        return len(self.mode_domains)

    def in_domain(self, mode: int, state: np.ndarray, tol: float = DOMAIN_TOL) -> bool:
        box = self.mode_domains[mode]
        return bool(np.all(state >= box[:, 0] - tol) and np.all(state <= box[:, 1] + tol))

    def clip_control(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.control_lo, self.control_hi)

    def sample_initial(self, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        s = rng.uniform(self.initial_lo, self.initial_hi)
        mode = self.initial_mode(s) if callable(self.initial_mode) else int(self.initial_mode)
        return mode, s


@dataclass(frozen=True)
class Event:
    time: float
    transition_index: int
    pre_state: np.ndarray
    post_state: np.ndarray


@dataclass(frozen=True)
class Sample:
    time: float
    mode: int
    state: np.ndarray
    control: np.ndarray
    event_flag: int = 0


@dataclass
class HybridTrajectory:
    samples: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.samples])

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    def modes(self) -> np.ndarray:
        return np.array([s.mode for s in self.samples], dtype=int)


def _rk4(f: Callable[[np.ndarray], np.ndarray], s: np.ndarray, h: float) -> np.ndarray:
    k1 = f(s)
    k2 = f(s + 0.5 * h * k1)
    k3 = f(s + 0.5 * h * k2)
    k4 = f(s + h * k3)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_with_events(
    automaton: HybridAutomaton,
    mode: int,
    state: np.ndarray,
    control: np.ndarray,
    dt: float,
    t0: float = 0.0,
) -> tuple[int, np.ndarray, list]:
    """One zero-order-hold step of length dt with event localization.

    Returns (mode, state, events); event times are absolute (t0 offsets the
    step start).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    u = np.asarray(control, dtype=float)
    s = np.asarray(state, dtype=float)
    events: list[Event] = []
    remaining = dt
    elapsed = 0.0

    for _ in range(MAX_EVENTS_PER_STEP + 1):
        def f(x, _mode=mode):
            return np.asarray(automaton.dynamics(_mode, x, u), dtype=float)

        def flow(tau, _s=s, _f=f):
            # single RK4 step of size tau from the current substep start
            return _rk4(_f, _s, tau)

        s_end = flow(remaining)
        outgoing = [
            (idx, tr)
            for idx, tr in enumerate(automaton.transitions)
            if tr.from_mode == mode
        ]
        # earliest crossing among outgoing guards
        crossings = []
        for idx, tr in outgoing:
            g0 = tr.guard_value(s)
            g1 = tr.guard_value(s_end)
            if not tr.crosses(g0, g1):
                continue
            if abs(g0) <= GUARD_TOL:
                crossings.append((0.0, idx, tr))
                continue
            lo, hi = 0.0, remaining
            tau = hi
            for _it in range(BISECT_MAX_ITER):
                tau = 0.5 * (lo + hi)
                gm = tr.guard_value(flow(tau))
                if abs(gm) <= GUARD_TOL:
                    break
                if tr.crosses(g0, gm):
                    hi = tau
                else:
                    lo = tau
            crossings.append((tau, idx, tr))

        if not crossings:
            if not automaton.in_domain(mode, s_end):
                raise NoValidMode(
                    f"state {s_end} left domain of mode {mode} with no firing guard"
                )
            return mode, s_end, events

        crossings.sort(key=lambda c: c[0])
        tau_star, idx_star, tr_star = crossings[0]
        if len(crossings) > 1 and crossings[1][0] - tau_star < EVENT_TIME_TOL:
            raise AmbiguousEvent(
                f"guards {idx_star} and {crossings[1][1]} fire at the same instant"
            )

        pre = flow(tau_star) if tau_star > 0.0 else s.copy()
        post = tr_star.reset.apply(pre)
        elapsed += tau_star
        events.append(Event(t0 + elapsed, idx_star, pre, post))
        mode = tr_star.to_mode
        if not automaton.in_domain(mode, post):
            raise NoValidMode(
                f"post-reset state {post} outside domain of mode {mode}"
            )
        s = post
        remaining = remaining - tau_star
        if remaining <= 0.0:
            return mode, s, events

    raise AmbiguousEvent(
        f"more than {MAX_EVENTS_PER_STEP} events within one {dt}-step window"
    )


def step(
    automaton: HybridAutomaton,
    mode: int,
    state: np.ndarray,
    control: np.ndarray,
    dt: float,
) -> tuple[int, np.ndarray]:
    """Advance (mode, state) by dt under held control, handling guard events."""
    new_mode, new_state, _ = _step_with_events(automaton, mode, state, control, dt)
    return new_mode, new_state


def rollout(
    automaton: HybridAutomaton,
    policy: PolicyFn,
    s0: np.ndarray,
    mode0: int,
    horizon: float,
    dt: float,
) -> HybridTrajectory:
    """Roll the closed loop forward, recording samples each dt and all events.

    ``policy(mode, state)`` is evaluated at every sample and held over the
    step. Event instants contribute a pre/post sample pair sharing one
    timestamp. Deterministic given identical inputs.
    """
    s = np.asarray(s0, dtype=float)
    mode = int(mode0)
    if not automaton.in_domain(mode, s):
        raise NoValidMode(f"initial state {s} not in domain of mode {mode}")
    traj = HybridTrajectory()
    n_steps = int(round(horizon / dt)) if horizon > 0 else 0
    u = automaton.clip_control(np.asarray(policy(mode, s), dtype=float))
    traj.samples.append(Sample(0.0, mode, s.copy(), u.copy()))
    for i in range(n_steps):
        t = i * dt
        try:
            mode, s, events = _step_with_events(automaton, mode, s, u, dt, t0=t)
        except (NoValidMode, AmbiguousEvent) as err:
            raise type(err)(f"{err} (at t={t:.6f} s)") from err
        for ev in events:
            tr = automaton.transitions[ev.transition_index]
            traj.events.append(ev)
            traj.samples.append(Sample(ev.time, tr.from_mode, ev.pre_state.copy(), u.copy(), 1))
            traj.samples.append(Sample(ev.time, tr.to_mode, ev.post_state.copy(), u.copy(), 1))
        u = automaton.clip_control(np.asarray(policy(mode, s), dtype=float))
        traj.samples.append(Sample((i + 1) * dt, mode, s.copy(), u.copy()))
    return traj


def trajectory_to_csv(traj: HybridTrajectory, path: str, n: int, m: int) -> None:
    """Write `t,mode,s_0..s_{n-1},u_0..u_{m-1},event_flag` rows."""
    header = ["t", "mode"] + [f"s_{i}" for i in range(n)] + [f"u_{j}" for j in range(m)] + ["event_flag"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for smp in traj.samples:
            w.writerow(
                [repr(float(smp.time)), smp.mode]
                + [repr(float(x)) for x in smp.state]
                + [repr(float(x)) for x in smp.control]
                + [smp.event_flag]
            )


def make_affine_automaton(
    A: np.ndarray,
    B: np.ndarray,
    c: np.ndarray | None = None,
    *,
    domain: np.ndarray | None = None,
    control_lo=None,
    control_hi=None,
) -> HybridAutomaton:
    """Single-mode automaton with exactly affine dynamics ṡ = A s + B u + c.

    Convenience for tests and the affine-system behavioral checks; the
    returned object still only exposes black-box sampling.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if domain is None:
        domain = np.stack([-1e6 * np.ones(n), 1e6 * np.ones(n)], axis=1)
    lo = -np.ones(m) if control_lo is None else np.asarray(control_lo, dtype=float)
    hi = np.ones(m) if control_hi is None else np.asarray(control_hi, dtype=float)

    def dyn(_mode, s, u):
        return A @ s + B @ u + c

    return HybridAutomaton(
        n=n,
        m=m,
        mode_domains=(domain,),
        dynamics=dyn,
        transitions=(),
        control_lo=lo,
        control_hi=hi,
        initial_lo=domain[:, 0],
        initial_hi=domain[:, 1],
        initial_mode=0,
    )
