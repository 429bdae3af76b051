"""Stasis domains: the box ``C(t)``, its zero-sum section and the shape polytope.

With ``D`` the difference matrix, the shape-space stasis domain is

    C_sh(t) = {zeta in R^{N-1} : -mu_minus(t) <= D^T zeta <= mu_plus(t)},

whose image under ``D^T`` is the section ``C(t) & {sum = 0}``. Points of the
section are full tensions; ``D^T`` is the map between the two coordinate
systems (it is not an isometry, hence the two pictures differ by a linear
rescaling).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dissipation import TIE_TOL, DissipationSpec
from .model import QuadraticEnergy, difference_matrix
from .timeprog import DomainError

#: absolute tolerance (force units) for facet activity and containment
FACE_TOL = 1e-10

ZERO, NONNEG, NONPOS, ALL = "zero", ">=0", "<=0", "R"


@dataclass(frozen=True)
class DirectionLabel:
    """Attainable signs of the net-translation velocity at a face of ``C_sh``.

    ``face`` is ``("vertex", j)``, ``("facet", h)`` or ``("interior", -1)``,
    indices referring to :attr:`StasisGeometry.vertices` and
    :attr:`StasisGeometry.normals`.
    """

    face: tuple[str, int]
    sign_set: str


@dataclass(frozen=True, eq=False)
class StasisGeometry:
    t: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    normals: np.ndarray          # 2N x (N-1), rows: +D[:, i] then -D[:, i]
    offsets: np.ndarray          # 2N
    vertices: np.ndarray | None  # V x (N-1), only when N-1 <= 3

    @property
    def n_points(self) -> int:
        return self.box_lo.size

    @property
    def dim(self) -> int:
        return self.n_points - 1

    def to_section(self, zeta) -> np.ndarray:
        """Full-space tension ``D^T zeta`` of a shape-space point."""
        return np.asarray(zeta, dtype=float) @ difference_matrix(self.n_points)

    def slack(self, zeta) -> np.ndarray:
        return self.offsets - np.asarray(zeta, dtype=float) @ self.normals.T

    def contains(self, zeta, tol: float = FACE_TOL) -> bool:
        return bool(np.all(self.slack(zeta) >= -tol))

    def support(self, w) -> float:
        """``max <zeta, w>`` over the stored vertices."""
        if self.vertices is None:
            raise ValueError("vertices are only enumerated for N - 1 <= 3")
        return float(np.max(self.vertices @ np.asarray(w, dtype=float)))

    def label_point(self, zeta, tol: float = FACE_TOL) -> str:
        return _sign_set(self.to_section(zeta), self.box_lo, self.box_hi, tol)

    def vertex_labels(self) -> list[DirectionLabel]:
        return [DirectionLabel(("vertex", j), self.label_point(v))
                for j, v in enumerate(self.vertices)]

    def facet_labels(self, tol: float = 1e-9) -> list[DirectionLabel]:
        """Labels of the facets of dimension ``N - 2`` (needs vertices)."""
        out = []
        for h in range(self.offsets.size):
            on = self.vertices[np.abs(self.slack(self.vertices)[:, h]) <= tol]
            if on.shape[0] < self.dim or np.linalg.matrix_rank(on - on[0], tol=1e-9) < self.dim - 1:
                continue
            out.append(DirectionLabel(("facet", h), self.label_point(on.mean(axis=0))))
        return out

    def polygon(self) -> np.ndarray:
        """Vertices in counter-clockwise order (two-dimensional case)."""
        if self.dim != 2:
            raise ValueError("polygon ordering needs a 2-d shape space")
        c = self.vertices.mean(axis=0)
        ang = np.arctan2(self.vertices[:, 1] - c[1], self.vertices[:, 0] - c[0])
        return self.vertices[np.argsort(ang)]

    def polygon_edges(self) -> list[tuple[np.ndarray, np.ndarray, str]]:
        """Consecutive edges of the polygon with the label of each edge."""
        P = self.polygon()
        out = []
        for a, b in zip(P, np.roll(P, -1, axis=0)):
            out.append((a, b, self.label_point(0.5 * (a + b))))
        return out

    def to_json(self) -> dict:
        data = {
            "t": self.t,
            "box_lo": self.box_lo.tolist(), "box_hi": self.box_hi.tolist(),
            "halfspaces": [{"normal": n.tolist(), "offset": float(o)}
                           for n, o in zip(self.normals, self.offsets)],
            "vertices": None, "section_vertices": None, "labels": [],
        }
        if self.vertices is not None:
            data["vertices"] = self.vertices.tolist()
            data["section_vertices"] = self.to_section(self.vertices).tolist()
            data["labels"] = [{"face": list(lab.face), "sign_set": lab.sign_set}
                              for lab in self.vertex_labels() + self.facet_labels()]
        if self.dim == 2:
            data["edges"] = [{"from": a.tolist(), "to": b.tolist(), "sign_set": s}
                             for a, b, s in self.polygon_edges()]
        return data


def _sign_set(xi, lo, hi, tol) -> str:
    upper = np.abs(xi - hi) <= tol
    lower = np.abs(xi - lo) <= tol
    if np.any(upper & lower):
        return ALL
    if upper.any() and lower.any():
        return ALL
    if upper.any():
        return NONNEG
    if lower.any():
        return NONPOS
    return ZERO


def halfspaces(mm, mp) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(n, o)`` with ``n . zeta <= o`` describing ``C_sh`` for given coefficients."""
    Dt = difference_matrix(len(mm)).T            # N x (N-1)
    return np.vstack([Dt, -Dt]), np.concatenate([mp, mm])


def enumerate_vertices(normals, offsets, tol: float = FACE_TOL) -> np.ndarray:
    """Vertices of ``{zeta : normals @ zeta <= offsets}`` by exhaustive intersection."""
    dim = normals.shape[1]
    pts = []
    for idx in itertools.combinations(range(normals.shape[0]), dim):
        M = normals[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, offsets[list(idx)])
        if np.all(normals @ v <= offsets + tol):
            pts.append(v)
    if not pts:
        return np.zeros((0, dim))
    pts = np.array(pts)
    keep = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= 1e-9 for q in keep):
            keep.append(p)
    return np.array(keep)


def build_geometry(d: DissipationSpec, t: float) -> StasisGeometry:
    """Stasis geometry of ``d`` at time ``t``."""
    mm, mp = d.coefficients(t)
    normals, offsets = halfspaces(mm, mp)
    verts = enumerate_vertices(normals, offsets) if len(mm) - 1 <= 3 else None
    for arr in (mm, mp, normals, offsets):
        arr.setflags(write=False)
    return StasisGeometry(float(t), -mm, mp, normals, offsets, verts)


def is_admissible(energy: QuadraticEnergy, d: DissipationSpec, t: float, x0,
                  tol: float = FACE_TOL) -> tuple[bool, float]:
    """Whether ``l(t) - 2 A x0`` lies in ``C(t)``; returns ``(ok, smallest slack)``."""
    mm, mp = d.coefficients(t)
    tau, _ = energy.tension(t, x0)
    margin = float(np.min(np.minimum(mp - tau, tau + mm)))
    return margin >= -tol, margin


def normal_cone_direction(d: DissipationSpec, t: float, xi, tol: float = FACE_TOL) -> DirectionLabel:
    """Sign set of ``pi(v)`` over ``v`` in the normal cone of ``C(t)`` at ``xi``."""
    mm, mp = d.coefficients(t)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi > mp + tol) or np.any(xi < -mm - tol):
        raise DomainError("tension lies outside the stasis box")
    label = _sign_set(xi, -mm, mp, tol)
    kind = "interior" if label == ZERO else "facet"
    return DirectionLabel((kind, -1), label)


def box_vertices_on_section(mm, mp, tol: float = TIE_TOL) -> np.ndarray:
    """Sign patterns (1 = upper bound) of the box vertices with zero coordinate sum."""
    mm, mp = np.asarray(mm, float), np.asarray(mp, float)
    n = mm.size
    if n > 20:
        raise ValueError("box-vertex enumeration limited to N <= 20")
    bits = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(bool)
    sums = np.where(bits, mp, -mm).sum(axis=1)
    return bits[np.abs(sums) <= tol]
