"""Quasi-static evolution by incremental minimisation (catch-up scheme).

Each step solves

    x_{k+1} = argmin_x  E(t_{k+1}, x) + R(t_{k+1}, x - x_k),

whose optimality condition is ``l(t_{k+1}) - 2 A x_{k+1} in dR(t_{k+1}, x_{k+1} - x_k)``.
In terms of the increment ``u`` and the predictor tension
``tau0 = l(t_{k+1}) - 2 A x_k`` the problem is

    min_u  <A u, u> - <tau0, u> + R(u).

The default inner solver is a primal-dual active-set iteration that is exact
up to round-off; an accelerated proximal-gradient iteration is available as
an alternative. Both end with the same coordinate-interval certificate, and
the translation part of the increment is always re-selected by the exact
one-dimensional minimisation of ``R`` along rigid translations, so that
non-unique steps are detected and resolved by an explicit tie-break.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .dissipation import (TIE_TOL, CombinatorialError, DissipationSpec, R_value,
                          UniquenessWarning, check_coercive_regularity, check_time_dependent,
                          min_translation, min_translation_batch, prox_values)
from .stasis import is_admissible
from .model import CrawlerModel, QuadraticEnergy, assemble, chi, pi, sigma
from .timeprog import merge_breakpoints

log = logging.getLogger(__name__)

#: tolerance for classifying a tension component as lying on a face of C
BOUNDARY_TOL = 1e-10


class InadmissibleStateError(ValueError):
    """Initial tension outside the stasis domain."""

    def __init__(self, message, margin):
        super().__init__(message)
        self.margin = margin


@dataclass
class SolverConfig:
    steps_per_unit_time: int = 1000
    event_align: bool = True
    prox_tol: float = 1e-10
    max_inner_iters: int = 100_000
    tie_break: str | float = "midpoint"
    inner: str = "active_set"

    def __post_init__(self):
        if int(self.steps_per_unit_time) < 1:
            raise ValueError("steps_per_unit_time must be >= 1")
        if not self.prox_tol > 0:
            raise ValueError("prox_tol must be positive")
        if int(self.max_inner_iters) < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if self.inner not in ("active_set", "fista"):
            raise ValueError("inner must be 'active_set' or 'fista'")
        if isinstance(self.tie_break, str):
            if self.tie_break not in ("midpoint", "min_norm"):
                raise ValueError("tie_break must be 'midpoint', 'min_norm' or a number in [0, 1]")
        elif not 0.0 <= float(self.tie_break) <= 1.0:
            raise ValueError("numeric tie_break must lie in [0, 1]")


# -- certificate ------------------------------------------------------------------

def certificate_residual(tau, u, mm, mp):
    """Largest distance of ``tau_i`` from ``dR_i(u_i)`` over the coordinates.

    Works row-wise on stacked arrays (one value per row).
    """
    tau, u = np.asarray(tau, dtype=float), np.asarray(u, dtype=float)
    free = np.maximum(0.0, np.maximum(tau - mp, -mm - tau))
    r = np.where(u > 0, np.abs(tau - mp), np.where(u < 0, np.abs(tau + mm), free))
    out = np.max(r, axis=-1, initial=0.0)
    return float(out) if np.ndim(out) == 0 else out


def _pick_translation(lo, hi, tie_break):
    """Selection inside the minimiser interval ``[lo, hi]`` (vectorised)."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if tie_break == "midpoint":
        v = 0.5 * (lo + hi)
    elif tie_break == "min_norm":
        v = np.clip(0.0, lo, hi)
    else:
        # lambda parametrisation: 0 -> upper end, 1 -> lower end
        v = hi - float(tie_break) * (hi - lo)
    v = np.where(hi > lo, v, lo)
    return float(v) if v.ndim == 0 else v


@dataclass
class StepResult:
    x: np.ndarray
    increment: np.ndarray
    tension: np.ndarray
    residual: float
    iterations: int
    nonunique: bool
    interval: tuple[float, float]
    iter_limit: bool
    method: str


class IncrementSolver:
    """Solver for ``min_u <A u, u> - <tau0, u> + R(u)`` with fixed ``A``."""

    def __init__(self, energy: QuadraticEnergy, cfg: SolverConfig):
        self.A = np.asarray(energy.A)
        self.A2 = 2.0 * self.A
        self.n = self.A.shape[0]
        self.cfg = cfg
        self.banded = energy.banded and self.n > 8
        self.gamma = 1.0 / np.diag(self.A2)
        self.lip = 2.0 * energy.lambda_max + 1e-9
        if self.banded:
            self.diag = np.diag(self.A2).copy()
            self.off = np.diag(self.A2, 1).copy()
        self.slack = 0.0

    def slack_tol(self, mm, mp) -> float:
        """Round-off allowance for the stick test, relative to the friction scale."""
        self.slack = 1e-13 * max(1.0, float(np.max(mm)), float(np.max(mp)))
        return self.slack

    # linear solve on the free set F of  2 A_FF u_F = rhs
    def _solve_free(self, F, rhs):
        if self.banded:
            idx = np.flatnonzero(F)
            if idx.size == 1:
                return rhs / self.diag[idx[0]]
            off = self.off[idx[:-1]] * (np.diff(idx) == 1)
            ab = np.zeros((2, idx.size))
            ab[0, 1:] = off
            ab[1] = self.diag[idx]
            return solveh_banded(ab, rhs)
        sub = self.A2[np.ix_(F, F)]
        return np.linalg.solve(sub, rhs)

    def _solve_sets(self, tau0, mm, mp, P, M):
        """Increment with ``tau = mp`` on ``P``, ``tau = -mm`` on ``M`` and ``u = 0`` elsewhere."""
        u = np.zeros(self.n)
        F = P | M
        if F.all():
            target = np.where(P, mp, -mm)
            if abs(target.sum()) <= TIE_TOL * max(1.0, float(np.sum(mm + mp))):
                u = np.linalg.lstsq(self.A2, tau0 - target, rcond=None)[0]
                return u, P, M
            # every point sliding cannot balance: pin the point whose predictor
            # tension is closest to its bound
            gap = np.where(P, tau0 - mp, -mm - tau0)
            pin = int(np.argmin(gap))
            P, M = P.copy(), M.copy()
            P[pin] = M[pin] = False
            F = P | M
        if F.any():
            target = np.where(P, mp, -mm)[F]
            u[F] = self._solve_free(F, tau0[F] - target)
        return u, P, M

    def _pdas(self, tau0, mm, mp, P, M):
        g = self.gamma
        seen = set()
        single = False
        max_iter = 4 * self.n + 50
        u = np.zeros(self.n)
        for it in range(1, max_iter + 1):
            u, P, M = self._solve_sets(tau0, mm, mp, P, M)
            tau = tau0 - self.A2 @ u
            if certificate_residual(tau, u, mm, mp) <= self.cfg.prox_tol:
                return u, it, True
            # a small band keeps degenerate points (on a bound, not moving) stuck
            q = u + g * tau
            band = 0.1 * self.cfg.prox_tol * g
            P_new = q > g * mp + band
            M_new = q < -g * mm - band
            # a sliding point whose direction reverses is first held fixed
            flip = (P & M_new) | (M & P_new)
            P_new &= ~flip
            M_new &= ~flip
            changed = (P_new != P) | (M_new != M)
            if not changed.any():
                return u, it, False
            key = (P_new.tobytes(), M_new.tobytes())
            single = single or key in seen
            seen.add(key)
            if single:
                # cycling: move only the most violated index
                over = np.maximum(0.0, np.maximum(tau - mp, -mm - tau))
                wrong = np.where((P & (u < 0)) | (M & (u > 0)), np.abs(u) / g, 0.0)
                score = np.where(changed, np.maximum(over, wrong), -1.0)
                i = int(np.argmax(score))
                P, M = P.copy(), M.copy()
                P[i], M[i] = P_new[i], M_new[i]
            else:
                P, M = P_new, M_new
        return u, max_iter, False

    def _active_set(self, tau0, mm, mp, start):
        iters = 0
        if start is not None:
            u, iters, ok = self._pdas(tau0, mm, mp, *start)
            if ok:
                return u, iters, True
        u, it, ok = self._pdas(tau0, mm, mp, tau0 > mp, tau0 < -mm)
        return u, iters + it, ok

    def slip_run(self, x, sets, loads, mm, mp, slack, tie):
        """Advance several steps with fixed slip sets ``(P, M)``.

        Returns the number of leading steps whose optimality conditions hold
        and the stacked states of the whole window.
        """
        P, M = sets
        F = P | M
        if not F.any() or F.all():
            return 0, None
        Z = ~F
        W = loads.shape[0]
        target = np.where(P, mp, -mm)
        rhs = loads[:, F] - target[:, F]
        if Z.any():
            rhs = rhs - x[Z] @ self.A2[np.ix_(Z, F)]
        X = np.repeat(x[None, :], W, axis=0)
        X[:, F] = self._solve_free(F, rhs.T).T
        U = np.diff(np.vstack([x[None, :], X]), axis=0)
        ok = np.all(U[:, P] >= 0, axis=1) & np.all(U[:, M] <= 0, axis=1)
        tauZ = loads[:, Z] - X @ self.A2[:, Z]
        ok &= np.all((tauZ <= mp[:, Z] + slack) & (tauZ >= -mm[:, Z] - slack), axis=1)
        # slopes of the translation restriction at 0 must not vanish (unique step)
        right = np.sum(np.where(U >= 0, mp, -mm), axis=1)
        left = np.sum(np.where(U > 0, mp, -mm), axis=1)
        ok &= (right > tie) & (left < -tie)
        return _prefix(ok), X

    def _fista(self, tau0, mm, mp, u0, max_iter):
        step = 1.0 / self.lip
        u = np.zeros(self.n) if u0 is None else u0.copy()
        v = u.copy()
        theta = 1.0
        res = np.inf
        for it in range(1, max_iter + 1):
            grad = self.A2 @ v - tau0
            u_new = prox_values(mm, mp, step, v - step * grad)
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            v = u_new + ((theta - 1.0) / theta_new) * (u_new - u)
            u, theta = u_new, theta_new
            if it % 10 == 0 or it == max_iter:
                res = certificate_residual(tau0 - self.A2 @ u, u, mm, mp)
                if res <= self.cfg.prox_tol:
                    return u, it, True
        return u, max_iter, False

    def solve(self, tau0, mm, mp, warm=None) -> tuple[np.ndarray, dict]:
        cfg = self.cfg
        if np.all(tau0 <= mp + self.slack) and np.all(tau0 >= -mm - self.slack):
            u = np.zeros(self.n)
            return u, {"iterations": 0, "method": "stationary", "converged": True}
        method = cfg.inner
        iters = 0
        converged = False
        u = None
        if method == "active_set":
            u, iters, converged = self._active_set(tau0, mm, mp, warm)
            if converged:
                converged = certificate_residual(tau0 - self.A2 @ u, u, mm, mp) <= cfg.prox_tol
            if not converged:
                method = "fista"
                log.debug("active set did not settle, falling back to FISTA")
        if method == "fista":
            u, it2, converged = self._fista(tau0, mm, mp, u, cfg.max_inner_iters)
            iters += it2
        return u, {"iterations": iters, "method": method, "converged": converged}


def _finalize(u, tau0, A2, mm, mp, tie_break, mid_coeffs=None):
    """Re-select the translation part of ``u`` exactly.

    Returns ``(u, tension, (lo, hi), resolved)``. When the minimiser interval
    is a segment only because the coefficients tie at the step end, the
    coefficients at the step mid-time (``mid_coeffs``) pick the selection and
    ``resolved`` is true; otherwise the configured tie-break is used.
    """
    c = u - u.mean()
    _, lo, hi = min_translation(c, mm, mp)
    resolved = False
    if hi <= lo:
        v = lo
    else:
        v = None
        if mid_coeffs is not None:
            _, lo2, hi2 = min_translation(c, *mid_coeffs)
            if hi2 <= lo2:
                v = float(np.clip(lo2, lo, hi))
                resolved = True
        if v is None:
            v = _pick_translation(lo, hi, tie_break)
    u = c + v
    tau = tau0 - A2 @ u
    return u, tau, (lo, hi), resolved


def step(energy: QuadraticEnergy, diss: DissipationSpec, t_k: float, t_next: float,
         x_k, cfg: SolverConfig | None = None) -> StepResult:
    """One incremental-minimisation step from ``(t_k, x_k)`` to ``t_next``."""
    cfg = cfg or SolverConfig()
    if not t_next > t_k:
        raise ValueError("need t_next > t_k")
    x_k = np.asarray(x_k, dtype=float)
    mm, mp = diss.coefficients(t_next)
    solver = IncrementSolver(energy, cfg)
    tau0 = energy.load(t_next) - solver.A2 @ x_k
    u, info = solver.solve(tau0, mm, mp)
    u, tau, interval, resolved = _finalize(u, tau0, solver.A2, mm, mp, cfg.tie_break,
                                           diss.coefficients(0.5 * (t_k + t_next)))
    res = certificate_residual(tau, u, mm, mp)
    nonunique = interval[1] > interval[0] and not resolved
    return StepResult(x_k + u, u, tau, res, info["iterations"], nonunique,
                      interval, not info["converged"], info["method"])


# -- time grid ----------------------------------------------------------------------

def time_grid(programs, t0: float, t1: float, steps_per_unit_time: int,
              event_align: bool = True) -> np.ndarray:
    """Uniform refinement of the merged input breakpoints (or a plain uniform grid)."""
    if event_align:
        knots = merge_breakpoints(programs, t0, t1)
    else:
        knots = np.array([t0, t1], dtype=float)
    pieces = []
    for a, b in zip(knots[:-1], knots[1:]):
        m = max(1, int(np.ceil((b - a) * steps_per_unit_time - 1e-9)))
        pieces.append(np.linspace(a, b, m + 1)[:-1])
    pieces.append([t1])
    return np.concatenate(pieces)


# -- trajectory ----------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    tension_full: np.ndarray
    tension_sh: np.ndarray
    dissipation: np.ndarray          # per-step increments R(t_{k+1}, dx_k)
    flags: dict
    residuals: np.ndarray
    iterations: np.ndarray
    y_vm: np.ndarray
    intervals: np.ndarray
    uniqueness: dict = field(default_factory=dict)
    resolved_ties: int = 0

    @property
    def z(self) -> np.ndarray:
        return sigma(self.x)

    @property
    def y(self) -> np.ndarray:
        return pi(self.x)

    @property
    def dissipated(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.dissipation)])

    @property
    def n_points(self) -> int:
        return self.x.shape[1]

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a grid point")
        return k

    def displacement(self, t_a: float, t_b: float) -> float:
        return float(self.y[self.index_of(t_b)] - self.y[self.index_of(t_a)])

    def slip_steps(self, tol: float = 1e-13) -> np.ndarray:
        dx = np.diff(self.x, axis=0)
        return np.max(np.abs(dx), axis=1) > tol

    def slip_onsets(self, tol: float = 1e-13) -> list[dict]:
        """Start times of slip episodes, interpolated inside the onset step.

        An episode is a maximal run of moving steps with a constant sign of
        shape change; its onset is estimated by comparing the partial
        increment of the first moving step to that of the next one.
        """
        moving = self.slip_steps(tol)
        dz = np.diff(self.z, axis=0)
        direction = np.sign(np.sum(dz, axis=1))
        out = []
        prev_dir = 0.0
        for k in np.flatnonzero(moving):
            new = k == 0 or not moving[k - 1] or direction[k] != prev_dir
            prev_dir = direction[k]
            if not new:
                continue
            t_a, t_b = self.times[k], self.times[k + 1]
            t_on = t_a
            if k + 1 < moving.size and moving[k + 1]:
                full = np.max(np.abs(dz[k + 1])) / (self.times[k + 2] - self.times[k + 1])
                part = np.max(np.abs(dz[k]))
                if full > 0:
                    t_on = float(np.clip(t_b - part / full, t_a, t_b))
            out.append({"t": float(t_on), "step": int(k), "direction": int(direction[k])})
        return out

    def to_csv(self, path) -> None:
        n = self.n_points
        header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"z{i + 1}" for i in range(n - 1)]
                  + ["y"] + [f"sigma{i + 1}" for i in range(n - 1)]
                  + ["dissipated", "nonunique_vm", "boundary_contact", "inner_iter_limit"])
        z, y, diss = self.z, self.y, self.dissipated
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, t in enumerate(self.times):
                flags = [int(self.flags[name][k]) for name in
                         ("nonunique_vm", "boundary_contact", "inner_iter_limit")]
                w.writerow([repr(float(t))] + [repr(float(v)) for v in self.x[k]]
                           + [repr(float(v)) for v in z[k]] + [repr(float(y[k]))]
                           + [repr(float(v)) for v in self.tension_sh[k]]
                           + [repr(float(diss[k]))] + flags)

    def summary(self) -> dict:
        return {
            "t0": float(self.times[0]), "t1": float(self.times[-1]),
            "steps": int(self.times.size - 1),
            "net_displacement": float(self.y[-1] - self.y[0]),
            "dissipated": float(self.dissipated[-1]),
            "slip_onsets": [o["t"] for o in self.slip_onsets()],
            "flags": {name: int(np.sum(v)) for name, v in self.flags.items()},
            "max_certificate_residual": float(self.residuals.max(initial=0.0)),
            "resolved_ties": self.resolved_ties,
            "max_y_discrepancy": float(np.max(np.abs(self.y - self.y_vm))),
            "uniqueness": self.uniqueness,
        }


def boundary_state(energy: QuadraticEnergy, diss: DissipationSpec, t: float,
                   kind: str) -> np.ndarray:
    """Initial displacement (barycenter 0) for the keywords of a scenario.

    ``relaxed`` has zero tension. ``max_compression`` / ``max_elongation`` carry a
    uniform shape tension ``+s`` / ``-s`` with the largest ``s`` keeping the
    full tension inside ``C(t)``; for two points this is ``+-mu_min``.
    """
    mm, mp = diss.coefficients(t)
    n = energy.n_points
    if kind == "relaxed":
        s = 0.0
    elif kind == "max_compression":
        s = min(mm[0], mp[-1])
    elif kind == "max_elongation":
        s = -min(mp[0], mm[-1])
    else:
        raise ValueError(f"unknown initial state keyword {kind!r}")
    z0 = energy.shape_for_tension(t, np.full(n - 1, s))
    return chi(z0, 0.0)


def _prefix(mask) -> int:
    """Number of leading ``True`` entries."""
    return int(mask.size) if mask.all() else int(np.argmin(mask))


def simulate(model: CrawlerModel, cfg: SolverConfig, x0, t0: float, t1: float,
             energy: QuadraticEnergy | None = None,
             diss: DissipationSpec | None = None,
             check_uniqueness: bool = True) -> Trajectory:
    """Evolve the crawler from ``x0`` at ``t0`` to ``t1``.

    ``x0`` is a displacement vector or one of the keywords accepted by
    :func:`boundary_state`. Runs of steps that keep the same stick/slip pattern
    are advanced together: a stationary run needs only the admissibility of
    the predictor tension, and a slip run with fixed active sets is a linear
    solve with one right-hand side per step. Each run is accepted only up to
    the first step whose optimality conditions fail; that step is redone by
    the general single-step solver.
    """
    energy = energy or assemble(model)
    diss = diss or DissipationSpec.from_model(model)
    n = energy.n_points
    if isinstance(x0, str):
        x0 = boundary_state(energy, diss, t0, x0)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"initial state must have {n} entries")
    ok, margin = is_admissible(energy, diss, t0, x0)
    if not ok:
        raise InadmissibleStateError(
            f"initial tension leaves the stasis domain (margin {margin:.3e})", margin)

    uniq = {}
    if check_uniqueness:
        try:
            rep, psi_reg = check_time_dependent(diss, t0, t1)
            uniq = {"diamond": rep.to_json(), "psi_regularity": psi_reg.to_json(),
                    "diamond2": check_coercive_regularity(diss).to_json()}
            if not rep.holds:
                warnings.warn("uniqueness fails on a time interval; trajectory is one "
                              "selection among several", UniquenessWarning)
        except CombinatorialError as exc:
            uniq = {"diamond": {"holds": None, "error": str(exc)}}

    programs = [*energy.rest, *diss.programs()]
    times = time_grid(programs, t0, t1, cfg.steps_per_unit_time, cfg.event_align)
    K = times.size
    rest = np.array([L(times) for L in energy.rest])
    loads = (energy.B.T @ (energy.k[:, None] * rest)).T               # K x N
    mm_all = diss.weights * np.array([p(times) for p in diss.mu_minus]).T
    mp_all = diss.weights * np.array([p(times) for p in diss.mu_plus]).T
    mids = 0.5 * (times[:-1] + times[1:])
    mm_mid = diss.weights * np.array([p(mids) for p in diss.mu_minus]).T
    mp_mid = diss.weights * np.array([p(mids) for p in diss.mu_plus]).T

    solver = IncrementSolver(energy, cfg)
    A2 = solver.A2
    slack = solver.slack_tol(mm_all, mp_all)
    tie = TIE_TOL * max(1.0, float(np.max(np.sum(mm_all + mp_all, axis=1))))
    xs = np.empty((K, n))
    xs[0] = x0
    iterations = np.zeros(K - 1, dtype=int)
    iter_limit = np.zeros(K, dtype=bool)
    nonunique = np.zeros(K, dtype=bool)
    resolved = np.zeros(K - 1, dtype=bool)
    intervals = np.zeros((K - 1, 2))
    sets = None
    x = x0
    k = 0
    window = 32
    while k < K - 1:
        end = min(K - 1, k + window)
        sl = slice(k + 1, end + 1)
        # stationary run
        tau = loads[sl] - x @ A2
        inside = np.all((tau <= mp_all[sl] + slack) & (tau >= -mm_all[sl] - slack), axis=1)
        m = _prefix(inside)
        if m == 0 and sets is not None and cfg.inner == "active_set":
            m, X = solver.slip_run(x, sets, loads[sl], mm_all[sl], mp_all[sl], slack, tie)
            if m:
                xs[k + 1:k + 1 + m] = X[:m]
                iterations[k:k + m] = 1
                x = xs[k + m]
        elif m:
            xs[k + 1:k + 1 + m] = x
        if m:
            window = min(2 * window, 8192) if k + m == end else 32
            k += m
            continue
        window = 32
        # single step with the general solver
        mm, mp = mm_all[k + 1], mp_all[k + 1]
        tau0 = loads[k + 1] - A2 @ x
        u, info = solver.solve(tau0, mm, mp, sets)
        if info["method"] != "stationary":
            u, _, _, res_tie = _finalize(u, tau0, A2, mm, mp, cfg.tie_break,
                                         (mm_mid[k], mp_mid[k]))
            resolved[k] = res_tie
            sets = (u > 0, u < 0)
        x = x + u
        xs[k + 1] = x
        iterations[k] = info["iterations"]
        iter_limit[k + 1] = not info["converged"]
        k += 1

    taus = loads - xs @ A2
    U = np.diff(xs, axis=0)
    moving = np.any(U != 0, axis=1)
    res_all = certificate_residual(taus[1:], U, mm_all[1:], mp_all[1:])
    iter_limit[1:] |= res_all > cfg.prox_tol
    diss_inc = np.sum(mp_all[1:] * np.maximum(U, 0.0) + mm_all[1:] * np.maximum(-U, 0.0), axis=1)
    contact = np.zeros(K, dtype=bool)
    contact[:] = np.any((np.abs(taus - mp_all) <= BOUNDARY_TOL)
                        | (np.abs(taus + mm_all) <= BOUNDARY_TOL), axis=1)
    # translation cross-check: minimal-velocity selection of every moving step
    y_vm = np.full(K, float(pi(x0)))
    if moving.any():
        C = U[moving] - U[moving].mean(axis=1, keepdims=True)
        lo, hi = min_translation_batch(C, mm_all[1:][moving], mp_all[1:][moving])
        v = _pick_translation(lo, hi, cfg.tie_break)
        dy = np.zeros(K - 1)
        dy[moving] = v
        # isolated ties were settled from the mid-step coefficients
        dy[resolved] = U[resolved].mean(axis=1)
        y_vm[1:] += np.cumsum(dy)
        nonunique[1:][moving] |= (hi > lo) & ~resolved[moving]
        intervals[moving] = np.column_stack([lo, hi])

    if np.any(nonunique):
        warnings.warn(f"{int(nonunique.sum())} steps had a non-unique translation; "
                      f"tie-break {cfg.tie_break!r} applied", UniquenessWarning)
    if np.any(iter_limit):
        warnings.warn(f"{int(iter_limit.sum())} steps missed the optimality certificate",
                      RuntimeWarning)
    tension_sh = taus_to_shape(energy, times, xs)
    return Trajectory(times, xs, taus, tension_sh, diss_inc,
                      {"nonunique_vm": nonunique, "boundary_contact": contact,
                       "inner_iter_limit": iter_limit},
                      res_all, iterations, y_vm, intervals, uniq, int(resolved.sum()))


def taus_to_shape(energy: QuadraticEnergy, times, xs) -> np.ndarray:
    loads_sh = (energy.G.T @ (energy.k[:, None] * np.array([L(times) for L in energy.rest]))).T
    return loads_sh - 2.0 * sigma(xs) @ energy.A_sh


# -- diagnostics -----------------------------------------------------------------------

def stress_violation(traj: Trajectory, diss: DissipationSpec) -> np.ndarray:
    """Per-step distance of the tension from ``C(t_k)`` (max norm)."""
    mm = diss.weights * np.array([p(traj.times) for p in diss.mu_minus]).T
    mp = diss.weights * np.array([p(traj.times) for p in diss.mu_plus]).T
    tau = traj.tension_full
    return np.max(np.maximum(0.0, np.maximum(tau - mp, -mm - tau)), axis=1)


def sweeping_invariant_check(traj: Trajectory, model: CrawlerModel) -> float:
    """Largest distance of the tension from the section ``C(t) & {sum = 0}``.

    The tension ``l(t) - 2 A x`` always has zero sum, so its distance from the
    section is the box violation plus the (round-off) sum defect.
    """
    diss = DissipationSpec.from_model(model)
    box = stress_violation(traj, diss)
    plane = np.abs(traj.tension_full.sum(axis=1)) / np.sqrt(traj.n_points)
    return float(np.max(box + plane))


def energy_balance(traj: Trajectory, model: CrawlerModel,
                   energy: QuadraticEnergy | None = None) -> dict:
    """Per-step energy-balance residuals of a trajectory.

    ``residual_k = E(t_{k+1}, x_{k+1}) - E(t_k, x_k) + R(t_{k+1}, dx_k) - W_k`` with
    the work increment ``W_k = -<l(t_{k+1}) - l(t_k), x_k>``.
    """
    energy = energy or assemble(model)
    t = traj.times
    loads = (energy.B.T @ (energy.k[:, None] * np.array([L(t) for L in energy.rest]))).T
    x = traj.x
    E = np.einsum("ki,ij,kj->k", x, energy.A, x) - np.einsum("ki,ki->k", loads, x)
    work = -np.einsum("ki,ki->k", loads[1:] - loads[:-1], x[:-1])
    residual = E[1:] - E[:-1] + traj.dissipation - work
    return {"residual": residual, "work": work, "energy": E,
            "cumulative_defect": float(np.sum(residual)),
            "max_abs": float(np.max(np.abs(residual), initial=0.0))}
