"""Affine safety constraints, jump-induced constraints, and buffer polytopes.

Buffers are axis-aligned boxes adjacent to a constraint boundary. Their
vertex sets back the repulsion/dissipation certificates: a condition that
holds at every vertex of a convex region under an affine policy holds on
the whole region.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateConstraint, InvalidBuffer
from .hybrid import AffineResetMap

SPAN_TOL = 1e-9


@dataclass(frozen=True)
class AffineConstraint:
    """Safety requirement C·s ≤ d on states of the active modes."""

    C: np.ndarray
    d: float
    active_modes: frozenset = frozenset({0})

    def __post_init__(self):
        object.__setattr__(self, "C", np.asarray(self.C, dtype=float).reshape(-1))
        object.__setattr__(self, "active_modes", frozenset(int(q) for q in self.active_modes))
        if not np.any(self.C != 0.0):
            raise ValueError("constraint row C must be nonzero")

    @property
    def row(self) -> np.ndarray:
        return self.C

    @property
    def bound(self) -> float:
        return float(self.d)

    def output(self, state: np.ndarray) -> float:
        return float(self.C @ state)

    def satisfied(self, state: np.ndarray, tol: float = 1e-9) -> bool:
        return self.output(state) <= self.d + tol


@dataclass(frozen=True)
class JumpConstraint:
    """Pre-reset constraint C̃·s ≤ d̃ whose satisfaction guarantees the
    post-reset state satisfies the source constraint (C̃ = C·M, d̃ = d − C·p)."""

    C_tilde: np.ndarray
    d_tilde: float
    source_transition: int = -1
    relative_degree: int = 1
    active_modes: frozenset = frozenset({0})

    def __post_init__(self):
        object.__setattr__(self, "C_tilde", np.asarray(self.C_tilde, dtype=float).reshape(-1))
        object.__setattr__(self, "active_modes", frozenset(int(q) for q in self.active_modes))
        if self.relative_degree not in (1, 2):
            raise ValueError("relative_degree must be 1 or 2")

    @property
    def row(self) -> np.ndarray:
        return self.C_tilde

    @property
    def bound(self) -> float:
        return float(self.d_tilde)

    def output(self, state: np.ndarray) -> float:
        return float(self.C_tilde @ state)

    def satisfied(self, state: np.ndarray, tol: float = 1e-9) -> bool:
        return self.output(state) <= self.d_tilde + tol


def derive_jump_constraint(
    constraint: AffineConstraint,
    reset: AffineResetMap,
    *,
    source_transition: int = -1,
    relative_degree: int = 1,
    active_modes=None,
) -> JumpConstraint:
    """Jump constraint induced by an affine reset: C̃ = C·M, d̃ = d − C·p.

    For any state s, C·(M s + p) ≤ d iff C̃·s ≤ d̃. The relative degree is
    declared by the caller; it is a property of the output/control chain,
    not of the reset algebra.
    """
    C_tilde = constraint.C @ reset.M
    d_tilde = constraint.d - float(constraint.C @ reset.p)
    if np.max(np.abs(C_tilde)) <= 1e-12:
        raise DegenerateConstraint("reset map annihilates the constrained output (C·M = 0)")
    return JumpConstraint(
        C_tilde=C_tilde,
        d_tilde=d_tilde,
        source_transition=source_transition,
        relative_degree=relative_degree,
        active_modes=frozenset(active_modes) if active_modes is not None else constraint.active_modes,
    )


def _box_output_range(C: np.ndarray, bounds: np.ndarray) -> tuple[float, float]:
    """Exact [min, max] of C·s over an axis-aligned box."""
    lo = np.where(C >= 0, bounds[:, 0], bounds[:, 1])
    hi = np.where(C >= 0, bounds[:, 1], bounds[:, 0])
    return float(C @ lo), float(C @ hi)


@dataclass(frozen=True)
class BufferSpec:
    """Axis-aligned buffer box adjacent to a constraint.

    For relative degree 1 the constraint output over the box must span
    exactly [d − w, d] with w > 0. For relative degree 2 the dissipation
    parameters (y_min, ydot_max, ydot_min) define β = ydot_max/(d̃ − y_min);
    y_min defaults to the minimum constraint output over the box.
    """

    constraint: object  # AffineConstraint | JumpConstraint
    bounds: np.ndarray  # (n, 2)
    relative_degree: int
    mode: int = 0
    y_min: float | None = None
    ydot_max: float | None = None
    ydot_min: float | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise ValueError("bounds must be an (n, 2) array")
        if np.any(self.bounds[:, 1] < self.bounds[:, 0]):
            raise ValueError("bounds must satisfy lo <= hi")
        if self.relative_degree not in (1, 2):
            raise ValueError("relative_degree must be 1 or 2")
        y_lo, y_hi = _box_output_range(self.constraint.row, self.bounds)
        if self.relative_degree == 1:
            d = self.constraint.bound
            if abs(y_hi - d) > SPAN_TOL:
                raise InvalidBuffer(
                    f"degree-1 buffer output range [{y_lo}, {y_hi}] must end at d={d}"
                )
            if y_hi - y_lo <= 0.0:
                raise InvalidBuffer("degree-1 buffer must have positive width")
        else:
            if self.y_min is None:
                object.__setattr__(self, "y_min", y_lo)
            if self.ydot_max is None or self.ydot_max <= 0.0:
                raise InvalidBuffer("degree-2 buffer requires ydot_max > 0")
            if self.constraint.bound <= self.y_min:
                raise InvalidBuffer(
                    f"degree-2 buffer requires d̃ > y_min, got d̃={self.constraint.bound}, "
                    f"y_min={self.y_min}"
                )

    @property
    def n(self) -> int:
        return self.bounds.shape[0]

    @property
    def width(self) -> float:
        y_lo, y_hi = _box_output_range(self.constraint.row, self.bounds)
        return y_hi - y_lo


@dataclass(frozen=True)
class VertexSet:
    vertices: tuple

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices)


def membership(buffer: BufferSpec, state: np.ndarray) -> bool:
    """Inclusive box membership; the active mode is tested by the caller."""
    s = np.asarray(state, dtype=float)
    return bool(np.all(s >= buffer.bounds[:, 0]) and np.all(s <= buffer.bounds[:, 1]))


def vertices(buffer: BufferSpec) -> VertexSet:
    """All corner points of the buffer box, degenerate dimensions deduped."""
    corners = []
    seen = set()
    for combo in itertools.product(*[(lo, hi) for lo, hi in buffer.bounds]):
        key = tuple(combo)
        if key in seen:
            continue
        seen.add(key)
        corners.append(np.array(combo, dtype=float))
    return VertexSet(tuple(corners))


def beta(buffer: BufferSpec) -> float:
    """Dissipation rate β = ydot_max / (d̃ − y_min) of a degree-2 buffer."""
    if buffer.relative_degree != 2:
        raise InvalidBuffer("beta is defined only for relative-degree-2 buffers")
    denom = buffer.constraint.bound - buffer.y_min
    if denom <= 0.0:
        raise InvalidBuffer(f"d̃ ≤ y_min ({buffer.constraint.bound} ≤ {buffer.y_min})")
    return float(buffer.ydot_max) / denom


def boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a[:, 0] <= b[:, 1]) and np.all(b[:, 0] <= a[:, 1]))


def check_buffers_disjoint(buffers) -> None:
    """Reject overlapping buffers within a mode; the switched policy needs
    an unambiguous region per state."""
    for i, a in enumerate(buffers):
        for b in buffers[i + 1:]:
            if a.mode == b.mode and boxes_overlap(a.bounds, b.bounds):
                raise ConfigError(
                    f"buffers {a.name or i!r} and {b.name!r} overlap in mode {a.mode}"
                )
