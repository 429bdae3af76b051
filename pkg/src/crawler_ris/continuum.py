"""Finite-element reduction of the one-dimensional continuous crawler.

The body occupies ``[a, b]`` with elastic energy ``(k/2) int (x' - eps)^2`` and
distributed dry friction of densities ``mu_minus``/``mu_plus``. Linear elements
turn each element into a spring of stiffness ``k_e / h_e`` with rest offset
``int_e eps``; friction is lumped on the nodes with hat-function weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CrawlerModel, Friction, Spring, StructuralError
from .solver import SolverConfig, simulate
from .timeprog import TimeProgram, combine


@dataclass(frozen=True, eq=False)
class Profile:
    """Piecewise-constant function of the reference coordinate."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        br = np.array(self.breaks, dtype=float).reshape(-1)
        va = np.array(self.values, dtype=float).reshape(-1)
        if br.size != va.size + 1 or br.size < 2:
            raise ValueError("a profile needs len(values) + 1 breaks")
        if np.any(np.diff(br) <= 0):
            raise ValueError("profile breaks must be strictly increasing")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "values", va)

    @classmethod
    def constant(cls, a: float, b: float, value: float) -> "Profile":
        return cls([a, b], [value])

    def pieces(self, lo: float, hi: float):
        """``(start, end, value)`` of the constant pieces overlapping ``[lo, hi]``."""
        cuts = np.concatenate([[lo], self.breaks[(self.breaks > lo) & (self.breaks < hi)], [hi]])
        for s, e in zip(cuts[:-1], cuts[1:]):
            j = int(np.clip(np.searchsorted(self.breaks, 0.5 * (s + e)) - 1, 0, self.values.size - 1))
            yield s, e, self.values[j]

    def integral(self, lo: float, hi: float) -> float:
        return float(sum((e - s) * v for s, e, v in self.pieces(lo, hi)))

    def hat_integral(self, nodes: np.ndarray, i: int) -> float:
        """Integral against the hat function of node ``i``."""
        total = 0.0
        for lo, hi, up in ((i - 1, i, True), (i, i + 1, False)):
            if lo < 0 or hi >= nodes.size:
                continue
            a, b = nodes[lo], nodes[hi]
            for s, e, v in self.pieces(a, b):
                mid = 0.5 * (s + e)
                phi = (mid - a) / (b - a) if up else (b - mid) / (b - a)
                total += v * (e - s) * phi
        return total

    @property
    def min(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class Term:
    """Space-time separable term ``program(t) * profile(xi)``."""

    program: TimeProgram
    profile: Profile


def _as_profile(v, a, b) -> Profile:
    return v if isinstance(v, Profile) else Profile.constant(a, b, float(v))


@dataclass(frozen=True, eq=False)
class ContinuumModel:
    a: float
    b: float
    stiffness: Profile
    distortion: tuple[Term, ...]
    mu_minus: tuple[Term, ...]
    mu_plus: tuple[Term, ...]
    n_elements: int = 100
    period: float | None = field(default=None)

    def __post_init__(self):
        if not self.b > self.a:
            raise StructuralError("empty domain")
        if int(self.n_elements) < 1:
            raise StructuralError("need at least one element")
        object.__setattr__(self, "stiffness", _as_profile(self.stiffness, self.a, self.b))
        if self.stiffness.min <= 0:
            raise StructuralError("stiffness must be strictly positive")
        for terms in (self.mu_minus, self.mu_plus):
            for term in terms:
                lo = term.program.lipschitz_and_bounds()[1]
                if lo < 0 or term.profile.min < 0:
                    raise StructuralError("friction densities must be non-negative")
        for name in ("distortion", "mu_minus", "mu_plus"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def length(self) -> float:
        return self.b - self.a

    @classmethod
    def homogeneous(cls, k: float, l: float, mu_minus: float, mu_plus: float,
                    eps: TimeProgram, n_elements: int = 100) -> "ContinuumModel":
        one = TimeProgram.constant(1.0, eps.t_start, eps.t_end, eps.period is not None)
        return cls(0.0, l, Profile.constant(0.0, l, k),
                   (Term(eps, Profile.constant(0.0, l, 1.0)),),
                   (Term(one, Profile.constant(0.0, l, mu_minus)),),
                   (Term(one, Profile.constant(0.0, l, mu_plus)),),
                   n_elements, eps.period)

    def with_elements(self, n: int) -> "ContinuumModel":
        return ContinuumModel(self.a, self.b, self.stiffness, self.distortion,
                              self.mu_minus, self.mu_plus, int(n), self.period)


def _combine(terms, coeffs) -> TimeProgram:
    if not terms:
        return TimeProgram.constant(0.0)
    return combine([t.program for t in terms], coeffs)


def discretize(c: ContinuumModel) -> CrawlerModel:
    """Equivalent discrete crawler on ``n_elements + 1`` equally spaced nodes."""
    nodes = np.linspace(c.a, c.b, c.n_elements + 1)
    h = np.diff(nodes)
    if np.any(h <= 0):
        raise StructuralError("zero-length element")
    springs = []
    for e in range(c.n_elements):
        lo, hi = nodes[e], nodes[e + 1]
        k_e = c.stiffness.integral(lo, hi) / h[e]
        rest = _combine(c.distortion, [t.profile.integral(lo, hi) for t in c.distortion])
        springs.append(Spring(e, e + 1, k_e / h[e], rest))
    friction = []
    for i in range(nodes.size):
        mm = _combine(c.mu_minus, [t.profile.hat_integral(nodes, i) for t in c.mu_minus])
        mp = _combine(c.mu_plus, [t.profile.hat_integral(nodes, i) for t in c.mu_plus])
        friction.append(Friction(mm, mp))
    return CrawlerModel(nodes, tuple(springs), tuple(friction))


def converged_cycle_displacement(c: ContinuumModel, cfg: SolverConfig, n_sequence,
                                 x0="relaxed", warmup: int = 1) -> list[float]:
    """Steady per-cycle displacement for each element count in ``n_sequence``."""
    if c.period is None:
        raise ValueError("cycle displacement needs periodic inputs")
    t0 = c.distortion[0].program.t_start if c.distortion else 0.0
    T = c.period
    out = []
    for n in n_sequence:
        traj = simulate(discretize(c.with_elements(n)), cfg, x0, t0, t0 + (warmup + 1) * T)
        out.append(traj.displacement(t0 + warmup * T, t0 + (warmup + 1) * T))
    return out
