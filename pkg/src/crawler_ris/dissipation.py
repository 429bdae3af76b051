"""Separable dry-friction dissipation and its shape reduction.

The dissipation potential of a discrete crawler is

    R(t, u) = sum_i w_i * (mu_plus_i(t) * max(u_i, 0) + mu_minus_i(t) * max(-u_i, 0)),

convex and positively 1-homogeneous in ``u``. Minimising it along rigid
translations gives the shape-reduced potential ``R_sh`` and the
minimal-velocity map ``v_m``; the uniqueness of that minimiser is the
symmetry-breaking condition checked by :func:`check_star`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import CrawlerModel, chi
from .timeprog import TimeProgram, merge_breakpoints

#: absolute tie tolerance (force units) for uniqueness tests
TIE_TOL = 1e-12
#: near-tie band producing an ill-conditioning warning
NEAR_TIE_TOL = 1e-9
#: largest number of subset combinations enumerated per half in check_star
MAX_HALF_COMBOS = 1 << 21


class NonCoerciveError(ValueError):
    """R restricted to a translation line has no minimiser."""


class CombinatorialError(ValueError):
    """Exhaustive subset enumeration would be too large."""


class UniquenessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DissipationSpec:
    mu_minus: tuple[TimeProgram, ...]
    mu_plus: tuple[TimeProgram, ...]
    weights: np.ndarray = None

    def __post_init__(self):
        n = len(self.mu_minus)
        if len(self.mu_plus) != n or n < 2:
            raise ValueError("need matching mu_minus/mu_plus for at least 2 points")
        w = np.ones(n) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ValueError("weights must be strictly positive, one per point")
        for p in (*self.mu_minus, *self.mu_plus):
            if np.any(p.values < 0):
                raise ValueError("friction programs must be non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "mu_minus", tuple(self.mu_minus))
        object.__setattr__(self, "mu_plus", tuple(self.mu_plus))
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_model(cls, model: CrawlerModel) -> "DissipationSpec":
        return cls(tuple(f.mu_minus for f in model.friction),
                   tuple(f.mu_plus for f in model.friction),
                   np.array([f.weight for f in model.friction]))

    @classmethod
    def constant(cls, mu_minus, mu_plus, n: int | None = None) -> "DissipationSpec":
        mm = np.atleast_1d(np.asarray(mu_minus, dtype=float))
        mp = np.atleast_1d(np.asarray(mu_plus, dtype=float))
        if n is not None:
            mm = np.broadcast_to(mm, (n,))
            mp = np.broadcast_to(mp, (n,))
        return cls(tuple(TimeProgram.constant(v) for v in mm),
                   tuple(TimeProgram.constant(v) for v in mp))

    @property
    def n_points(self) -> int:
        return len(self.mu_minus)

    def programs(self) -> list[TimeProgram]:
        return [*self.mu_minus, *self.mu_plus]

    def coefficients(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Weighted coefficients ``(w*mu_minus(t), w*mu_plus(t))``."""
        mm = np.array([p(t) for p in self.mu_minus])
        mp = np.array([p(t) for p in self.mu_plus])
        return self.weights * mm, self.weights * mp


# -- pointwise operations ------------------------------------------------------

def eval_R(d: DissipationSpec, t: float, u) -> float:
    mm, mp = d.coefficients(t)
    return R_value(mm, mp, u)


def R_value(mm, mp, u):
    """``R`` for fixed coefficients; stacked ``u`` gives one value per row."""
    u = np.asarray(u, dtype=float)
    out = np.sum(mp * np.maximum(u, 0.0) + mm * np.maximum(-u, 0.0), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def prox_R(d: DissipationSpec, t: float, step: float, v) -> np.ndarray:
    """Minimiser of ``|u - v|^2 / (2 step) + R(t, u)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    mm, mp = d.coefficients(t)
    return prox_values(mm, mp, step, v)


def prox_values(mm, mp, step, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(v > step * mp, v - step * mp,
                    np.where(v < -step * mm, v + step * mm, 0.0))


@dataclass(frozen=True)
class ShapeReduction:
    value: float
    vm: float
    interval: tuple[float, float]
    unique: bool


def min_translation(c, mm, mp) -> tuple[float, float, float]:
    """Exact minimiser set ``[lo, hi]`` of ``v -> sum_i R_i(c_i + v)`` and its value.

    The function is convex piecewise linear with kinks at ``v = -c_i``; its
    slope jumps by ``mm_i + mp_i`` at each kink, from ``-sum(mm)`` on the far
    left to ``sum(mp)`` on the far right, so the minimiser is where the
    cumulative slope changes sign (a weighted median).
    """
    c = np.asarray(c, dtype=float)
    total_m, total_p = float(np.sum(mm)), float(np.sum(mp))
    tol = TIE_TOL * max(1.0, total_m + total_p)
    if total_m <= tol or total_p <= tol:
        raise NonCoerciveError("dissipation is not coercive along translations")
    b = -c
    order = np.argsort(b, kind="stable")
    bs = b[order]
    slopes = -total_m + np.cumsum((mm + mp)[order])
    j = int(np.argmax(slopes >= -tol))
    if abs(slopes[j]) <= tol and j + 1 < bs.size:
        lo, hi = float(bs[j]), float(bs[j + 1])
    else:
        lo = hi = float(bs[j])
    return R_value(mm, mp, c + lo), lo, hi


def min_translation_batch(C, MM, MP) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`min_translation` (minimiser intervals only) for ``K x N`` arrays."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    MM = np.broadcast_to(MM, C.shape)
    MP = np.broadcast_to(MP, C.shape)
    total_m = MM.sum(axis=1)
    tol = TIE_TOL * np.maximum(1.0, total_m + MP.sum(axis=1))
    if np.any(total_m <= tol) or np.any(MP.sum(axis=1) <= tol):
        raise NonCoerciveError("dissipation is not coercive along translations")
    order = np.argsort(-C, axis=1, kind="stable")
    bs = np.take_along_axis(-C, order, axis=1)
    slopes = -total_m[:, None] + np.cumsum(np.take_along_axis(MM + MP, order, axis=1), axis=1)
    j = np.argmax(slopes >= -tol[:, None], axis=1)
    rows = np.arange(C.shape[0])
    lo = bs[rows, j]
    nxt = np.minimum(j + 1, C.shape[1] - 1)
    flat = (np.abs(slopes[rows, j]) <= tol) & (j + 1 < C.shape[1])
    hi = np.where(flat, bs[rows, nxt], lo)
    return lo, hi


def shape_reduced(d: DissipationSpec, t: float, w, tie_break: str = "midpoint") -> ShapeReduction:
    """Shape-reduced dissipation ``R_sh(t, w)`` and the minimal velocity ``v_m(t, w)``."""
    mm, mp = d.coefficients(t)
    return reduce_shape(mm, mp, w, tie_break)


def reduce_shape(mm, mp, w, tie_break: str = "midpoint") -> ShapeReduction:
    c = chi(np.asarray(w, dtype=float), 0.0)
    value, lo, hi = min_translation(c, mm, mp)
    unique = hi - lo <= 0.0
    if unique:
        vm = lo
    elif tie_break == "midpoint":
        vm = 0.5 * (lo + hi)
    elif tie_break == "min_norm":
        vm = float(np.clip(0.0, lo, hi))
    else:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    return ShapeReduction(value, vm, (lo, hi), unique)


# -- uniqueness conditions -------------------------------------------------------

@dataclass(frozen=True)
class UniquenessReport:
    holds: bool
    condition_name: str
    failing_witness: dict | None = None
    t: float | None = None
    partial: bool = False
    margin: float | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"holds": self.holds, "condition": self.condition_name,
                "failing_witness": self.failing_witness, "t": self.t,
                "partial": self.partial, "margin": self.margin, **self.details}


def _group_rows(a: np.ndarray):
    """Group equal rows of ``a`` (N x K); returns values, counts and member lists."""
    scale = max(1.0, float(np.max(np.abs(a))))
    keys = np.round(a / scale, 12)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    groups = [np.flatnonzero(inverse == g) for g in range(inverse.max() + 1)]
    values = np.array([a[g].mean(axis=0) for g in groups])
    counts = np.array([g.size for g in groups])
    return values, counts, groups


def _enumerate(values, counts):
    """All multiplicity combinations of the given groups and their sums."""
    sums = np.zeros((1, values.shape[1]))
    combos = np.zeros((1, 0), dtype=np.int32)
    for v, c in zip(values, counts):
        m = np.arange(c + 1)
        sums = (sums[:, None, :] + m[None, :, None] * v[None, None, :]).reshape(-1, values.shape[1])
        combos = np.concatenate([np.repeat(combos, c + 1, axis=0),
                                 np.tile(m, combos.shape[0])[:, None]], axis=1)
    return sums, combos


def balanced_subset(a, target, tol: float = TIE_TOL):
    """Find ``J`` with ``sum_{i in J} a_i == target`` (all K components) within ``tol``.

    Rows of ``a`` with equal values are grouped so that homogeneous models
    stay cheap; the remaining multiset is searched by meet-in-the-middle.
    Returns ``(J or None, margin)`` where ``margin`` is the smallest
    residual found (first component only, meaningful when K == 1).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 1 and a.shape[1] != 1:
        a = a.T
    target = np.atleast_1d(np.asarray(target, dtype=float))
    values, counts, groups = _group_rows(a)
    # split groups into two halves of similar enumeration size
    order = np.argsort(-(counts + 1))
    left, right, size_l, size_r = [], [], 1, 1
    for g in order:
        if size_l <= size_r:
            left.append(g)
            size_l *= counts[g] + 1
        else:
            right.append(g)
            size_r *= counts[g] + 1
    if max(size_l, size_r) > MAX_HALF_COMBOS:
        raise CombinatorialError(
            f"subset enumeration too large ({size_l} x {size_r} combinations)")
    sl, cl = _enumerate(values[left], counts[left])
    sr, cr = _enumerate(values[right], counts[right])
    need = target[None, :] - sl
    order_r = np.argsort(sr[:, 0], kind="stable")
    r0 = sr[order_r, 0]
    pos = np.clip(np.searchsorted(r0, need[:, 0]), 0, r0.size - 1)
    pos_lo = np.clip(pos - 1, 0, r0.size - 1)
    margin = float(np.min(np.minimum(np.abs(r0[pos] - need[:, 0]), np.abs(r0[pos_lo] - need[:, 0]))))
    lo = np.searchsorted(r0, need[:, 0] - tol, side="left")
    hi = np.searchsorted(r0, need[:, 0] + tol, side="right")
    for il in np.flatnonzero(hi > lo):
        cand = order_r[lo[il]:hi[il]]
        ok = np.all(np.abs(sr[cand] - need[il]) <= tol, axis=1)
        if np.any(ok):
            ir = cand[np.argmax(ok)]
            mult = np.zeros(len(groups), dtype=int)
            mult[left] = cl[il]
            mult[right] = cr[ir]
            J = sorted(int(i) for g, m in enumerate(mult) for i in groups[g][:m])
            return tuple(J), 0.0
    return None, margin


def _is_homogeneous(mm, mp) -> bool:
    return bool(np.ptp(mm) <= TIE_TOL * max(1.0, mm.max())
                and np.ptp(mp) <= TIE_TOL * max(1.0, mp.max()))


def check_coefficients(mm, mp, t: float | None = None, sample: int | None = None,
                       rng=None) -> UniquenessReport:
    """Uniqueness of translation minimisers for fixed coefficients."""
    mm = np.asarray(mm, dtype=float)
    mp = np.asarray(mp, dtype=float)
    n = mm.size
    if _is_homogeneous(mm, mp):
        m = np.arange(n + 1)
        g = m * mm[0] - (n - m) * mp[0]
        margin = float(np.min(np.abs(g)))
        bad = np.flatnonzero(np.abs(g) <= TIE_TOL)
        if margin <= NEAR_TIE_TOL and bad.size == 0:
            warnings.warn("near tie in the uniqueness condition", UniquenessWarning)
        if bad.size:
            return UniquenessReport(False, "SBdiscr", {"m": int(bad[0])}, t, margin=margin)
        return UniquenessReport(True, "SBdiscr", None, t, margin=margin)
    target = float(np.sum(mp))
    a = mm + mp
    try:
        J, margin = balanced_subset(a[:, None], [target])
        partial = False
    except CombinatorialError:
        if sample is None:
            raise
        J, margin = _sampled_subsets(a, target, sample, rng)
        partial = True
    if J is None and margin <= NEAR_TIE_TOL:
        warnings.warn("near tie in the uniqueness condition", UniquenessWarning)
    if J is not None:
        return UniquenessReport(False, "SBdiscr_asym", {"J": list(J)}, t, partial, margin)
    return UniquenessReport(True, "SBdiscr_asym", None, t, partial, margin)


def _sampled_subsets(a, target, sample, rng):
    rng = np.random.default_rng(rng)
    masks = rng.random((sample, a.size)) < 0.5
    g = masks @ a - target
    k = int(np.argmin(np.abs(g)))
    if abs(g[k]) <= TIE_TOL:
        return tuple(int(i) for i in np.flatnonzero(masks[k])), 0.0
    return None, float(abs(g[k]))


def check_star(d: DissipationSpec, t: float, sample: int | None = None,
               rng=None) -> UniquenessReport:
    """Check the translation-uniqueness condition at time ``t``.

    Homogeneous coefficients use the integer test ``m mu_- != (N-m) mu_+``;
    heterogeneous ones test ``sum_J mu_- != sum_{J^c} mu_+`` for every
    subset ``J``. With ``sample`` set, oversized instances fall back to
    random subsets and the report is marked ``partial``.
    """
    mm, mp = d.coefficients(t)
    return check_coefficients(mm, mp, t, sample, rng)


@dataclass(frozen=True)
class PsiRegularity:
    alpha_lower: float
    alpha_upper: float
    lipschitz: float
    holds: bool

    def to_json(self) -> dict:
        return {"alpha_lower": self.alpha_lower, "alpha_upper": self.alpha_upper,
                "lipschitz": self.lipschitz, "holds": self.holds}


def psi_regularity(d: DissipationSpec) -> PsiRegularity:
    """Constants of the bounds ``a_lo Psi <= R <= a_hi Psi`` for ``Psi(x) = sum w_i |x_i|``."""
    stats = np.array([p.lipschitz_and_bounds() for p in d.programs()])
    lip, lo, hi = float(stats[:, 0].max()), float(stats[:, 1].min()), float(stats[:, 2].max())
    return PsiRegularity(lo, hi, lip, lo > 0 and np.isfinite(lip))


def psi(d: DissipationSpec, x) -> float:
    return float(np.sum(d.weights * np.abs(np.asarray(x, dtype=float))))


def check_coercive_regularity(d: DissipationSpec) -> UniquenessReport:
    """Psi-regularity together with translation coercivity of ``Psi``.

    For ``Psi(x) = sum w_i |x_i|`` and ``x = chi(z, v)`` one has
    ``Psi(x) >= W |v| - W sqrt(N-1) |z|`` with ``W = sum w`` (the centred part of
    ``chi(z, 0)`` is bounded by ``|z|_1`` entrywise), and ``Psi(x) <= |w|_2 |x|``.
    The constants are reported; the condition holds when ``Psi``-regularity does.
    """
    reg = psi_regularity(d)
    W = float(np.sum(d.weights))
    consts = {"c1": W, "c2": W * float(np.sqrt(d.n_points - 1)),
              "c_psi": float(np.linalg.norm(d.weights)), **reg.to_json()}
    witness = None if reg.holds else {"alpha_lower": reg.alpha_lower}
    return UniquenessReport(reg.holds, "diamond2", witness, details=consts)


def check_time_dependent(d: DissipationSpec, t0: float, t1: float,
                         grid: Sequence[float] | None = None):
    """Check uniqueness for almost every time in ``[t0, t1]`` plus Psi-regularity.

    Coefficients are linear between merged breakpoints, so each subset sum is
    a linear function of time on a segment; a subset that balances at two
    interior points balances on the whole segment, which is the only way the
    condition can fail on a set of positive measure.
    """
    pts = merge_breakpoints(d.programs(), t0, t1)
    if grid is not None:
        pts = np.unique(np.concatenate([pts, np.asarray(grid, dtype=float)]))
    isolated = []
    interval_failures = []
    for ta, tb in zip(pts[:-1], pts[1:]):
        for s in (ta, 0.5 * (ta + tb)):
            r = check_star(d, s)
            if not r.holds:
                isolated.append({"t": float(s), **r.failing_witness})
        t_a, t_b = ta + (tb - ta) / 3, ta + 2 * (tb - ta) / 3
        (mma, mpa), (mmb, mpb) = d.coefficients(t_a), d.coefficients(t_b)
        a = np.stack([mma + mpa, mmb + mpb], axis=1)
        J, _ = balanced_subset(a, [mpa.sum(), mpb.sum()])
        if J is not None:
            interval_failures.append({"t0": float(ta), "t1": float(tb), "J": list(J)})
    r_end = check_star(d, pts[-1])
    if not r_end.holds:
        isolated.append({"t": float(pts[-1]), **r_end.failing_witness})
    isolated = [f for f in isolated
                if not any(iv["t0"] < f["t"] < iv["t1"] for iv in interval_failures)]
    holds = not interval_failures
    witness = None
    if not holds:
        witness = dict(interval_failures[0])
    report = UniquenessReport(holds, "diamond", witness,
                              None if holds else witness["t0"],
                              details={"isolated_failures": isolated,
                                       "interval_failures": interval_failures})
    return report, psi_regularity(d)
