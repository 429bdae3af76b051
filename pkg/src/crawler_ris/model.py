"""Crawler description and quadratic energy assembly.

Conventions (kept throughout the package):

* displacement ``x`` in R^N, shape ``z = sigma(x)`` = consecutive differences
  ``x[i+1] - x[i]``, net translation ``y = pi(x)`` = barycenter;
* energy ``E(t, x) = <A x, x> - <l(t), x>`` with no extra factor 1/2, hence
  ``D_x E = 2 A x - l(t)`` and the tension is ``l(t) - 2 A x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .timeprog import TimeProgram


class StructuralError(ValueError):
    """Invalid crawler topology or parameters."""


@dataclass(frozen=True)
class Spring:
    i: int
    j: int
    k: float
    L: TimeProgram


@dataclass(frozen=True)
class Friction:
    mu_minus: TimeProgram
    mu_plus: TimeProgram
    weight: float = 1.0


@dataclass(frozen=True)
class CrawlerModel:
    points: np.ndarray
    springs: tuple[Spring, ...]
    friction: tuple[Friction, ...]

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        n = pts.size
        if n < 2:
            raise StructuralError("a crawler needs at least 2 contact points")
        if np.any(np.diff(pts) <= 0):
            raise StructuralError("reference points must be strictly increasing")
        springs = tuple(self.springs)
        friction = tuple(self.friction)
        if not springs:
            raise StructuralError("no springs")
        for s in springs:
            if not (0 <= s.i < n and 0 <= s.j < n) or s.i == s.j:
                raise StructuralError(f"bad spring endpoints ({s.i}, {s.j})")
            if not s.k > 0:
                raise StructuralError("spring stiffness must be strictly positive")
        if len(friction) != n:
            raise StructuralError("need one friction entry per point")
        for f in friction:
            if not f.weight > 0:
                raise StructuralError("friction weights must be strictly positive")
        ii = [s.i for s in springs]
        jj = [s.j for s in springs]
        graph = coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
        ncomp, _ = connected_components(graph, directed=False)
        if ncomp != 1:
            raise StructuralError("spring graph is not connected")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "springs", springs)
        object.__setattr__(self, "friction", friction)

    @property
    def n_points(self) -> int:
        return self.points.size

    def programs(self) -> list[TimeProgram]:
        out = [s.L for s in self.springs]
        for f in self.friction:
            out += [f.mu_minus, f.mu_plus]
        return out

    def is_chain(self) -> bool:
        return all(abs(s.i - s.j) == 1 for s in self.springs)

    # -- convenience constructors ---------------------------------------------

    @classmethod
    def chain(cls, n: int, k: float | Sequence[float], L: TimeProgram | Sequence[TimeProgram],
              mu_minus, mu_plus, spacing: float = 1.0) -> "CrawlerModel":
        """Chain of ``n`` points with consecutive springs.

        ``k`` and ``L`` may be scalars/programs (shared) or per-link sequences;
        ``mu_minus``/``mu_plus`` may be numbers, programs or per-point sequences.
        """
        ks = np.broadcast_to(np.asarray(k, dtype=float), (n - 1,))
        Ls = list(L) if isinstance(L, (list, tuple)) else [L] * (n - 1)
        mm = _per_point(mu_minus, n)
        mp = _per_point(mu_plus, n)
        springs = [Spring(i, i + 1, float(ks[i]), Ls[i]) for i in range(n - 1)]
        friction = [Friction(mm[i], mp[i]) for i in range(n)]
        return cls(spacing * np.arange(n, dtype=float), tuple(springs), tuple(friction))


def _as_program(v) -> TimeProgram:
    return v if isinstance(v, TimeProgram) else TimeProgram.constant(float(v))


def _per_point(v, n):
    if isinstance(v, (list, tuple)):
        if len(v) != n:
            raise StructuralError("per-point list has wrong length")
        return [_as_program(p) for p in v]
    return [_as_program(v)] * n


# -- coordinate maps ---------------------------------------------------------

def difference_matrix(n: int) -> np.ndarray:
    """The (n-1) x n matrix D with ``D @ x = sigma(x)``."""
    D = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return D


def sigma(x) -> np.ndarray:
    return np.diff(np.asarray(x, dtype=float), axis=-1)


def pi(x) -> float | np.ndarray:
    return np.mean(np.asarray(x, dtype=float), axis=-1)


def chi(z, y) -> np.ndarray:
    """Displacement with shape ``z`` and barycenter ``y``."""
    z = np.asarray(z, dtype=float)
    c = np.concatenate([np.zeros(z.shape[:-1] + (1,)), np.cumsum(z, axis=-1)], axis=-1)
    c -= c.mean(axis=-1, keepdims=True)
    return c + np.asarray(y, dtype=float)[..., None]


# -- energy -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadraticEnergy:
    """Assembled operators of ``E(t, x) = <A x, x> - <l(t), x>``."""

    A: np.ndarray
    A_sh: np.ndarray
    D: np.ndarray
    B: np.ndarray           # spring incidence, rows e_j - e_i
    G: np.ndarray           # same in shape coordinates, B = G D
    k: np.ndarray
    rest: tuple[TimeProgram, ...]
    lambda_max: float
    banded: bool = field(default=False)

    @property
    def n_points(self) -> int:
        return self.A.shape[0]

    def spring_loads(self, t: float) -> np.ndarray:
        return self.k * np.array([L(t) for L in self.rest])

    def load(self, t: float) -> np.ndarray:
        return self.B.T @ self.spring_loads(t)

    def load_sh(self, t: float) -> np.ndarray:
        return self.G.T @ self.spring_loads(t)

    def energy(self, t: float, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x - self.load(t) @ x)

    def energy_sh(self, t: float, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ self.A_sh @ z - self.load_sh(t) @ z)

    def gradient(self, t: float, x) -> np.ndarray:
        return 2.0 * self.A @ np.asarray(x, dtype=float) - self.load(t)

    def tension(self, t: float, x) -> tuple[np.ndarray, np.ndarray]:
        """Full tension ``l(t) - 2 A x`` and shape tension ``l_sh(t) - 2 A_sh sigma(x)``."""
        x = np.asarray(x, dtype=float)
        loads = self.spring_loads(t)
        full = self.B.T @ loads - 2.0 * self.A @ x
        sh = self.G.T @ loads - 2.0 * self.A_sh @ sigma(x)
        return full, sh

    def relaxed_shape(self, t: float) -> np.ndarray:
        """Shape with zero tension at time ``t``."""
        return np.linalg.solve(2.0 * self.A_sh, self.load_sh(t))

    def shape_for_tension(self, t: float, tension_sh) -> np.ndarray:
        """Shape whose shape tension at time ``t`` equals ``tension_sh``."""
        return np.linalg.solve(2.0 * self.A_sh, self.load_sh(t) - np.asarray(tension_sh, float))


def assemble(model: CrawlerModel) -> QuadraticEnergy:
    """Assemble ``A``, ``A_sh`` and the load maps of a crawler."""
    n = model.n_points
    ne = len(model.springs)
    B = np.zeros((ne, n))
    G = np.zeros((ne, n - 1))
    for e, s in enumerate(model.springs):
        B[e, s.j] += 1.0
        B[e, s.i] -= 1.0
        lo, hi = min(s.i, s.j), max(s.i, s.j)
        # x_j - x_i as a sum of consecutive differences
        G[e, lo:hi] = 1.0 if s.j > s.i else -1.0
    k = np.array([s.k for s in model.springs])
    A = B.T @ (0.5 * k[:, None] * B)
    A_sh = G.T @ (0.5 * k[:, None] * G)
    A = 0.5 * (A + A.T)
    A_sh = 0.5 * (A_sh + A_sh.T)
    lam = float(np.linalg.eigvalsh(A)[-1])
    for arr in (A, A_sh, B, G, k):
        arr.setflags(write=False)
    return QuadraticEnergy(A=A, A_sh=A_sh, D=difference_matrix(n), B=B, G=G, k=k,
                           rest=tuple(s.L for s in model.springs), lambda_max=lam,
                           banded=model.is_chain())
