"""Piecewise-linear time programs.

Every time-dependent input of a crawler (rest-length offsets, friction
coefficients, active distortion amplitudes) is a :class:`TimeProgram`: a
continuous piecewise-linear function given by its breakpoints, optionally
extended periodically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when a program is evaluated outside its (non-periodic) domain."""


@dataclass(frozen=True, eq=False)
class TimeProgram:
    """Continuous piecewise-linear scalar function of time.

    Parameters
    ----------
    times, values : array_like
        Breakpoints. ``times`` must be strictly increasing (no jumps) and
        contain at least two entries.
    period : float, optional
        If given, the program is extended periodically with this period,
        anchored at ``times[0]``. The period must equal the breakpoint span
        and the first and last values must agree.
    """

    times: np.ndarray
    values: np.ndarray
    period: float | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float).reshape(-1)
        if t.size != v.size:
            raise ValueError("times and values must have the same length")
        if t.size < 2:
            raise ValueError("a time program needs at least 2 breakpoints")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if self.period is not None:
            period = float(self.period)
            if not np.isclose(period, t[-1] - t[0], rtol=1e-12, atol=1e-12):
                raise ValueError("period must equal the breakpoint span")
            if not np.isclose(v[0], v[-1], rtol=1e-12, atol=1e-12):
                raise ValueError("periodic program needs equal first and last values")
            object.__setattr__(self, "period", period)
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_breakpoints(cls, breakpoints: Iterable[Sequence[float]],
                         period: float | None = None) -> "TimeProgram":
        bp = np.asarray(list(breakpoints), dtype=float)
        if bp.ndim != 2 or bp.shape[1] != 2:
            raise ValueError("breakpoints must be a list of (time, value) pairs")
        return cls(bp[:, 0], bp[:, 1], period)

    @classmethod
    def constant(cls, value: float, t0: float = 0.0, t1: float = 1.0,
                 periodic: bool = True) -> "TimeProgram":
        return cls([t0, t1], [value, value], (t1 - t0) if periodic else None)

    @classmethod
    def triangle(cls, low: float, high: float, period: float = 1.0,
                 t0: float = 0.0) -> "TimeProgram":
        """Triangle wave starting at ``low``, peaking at ``high`` at mid-period."""
        return cls([t0, t0 + period / 2, t0 + period], [low, high, low], period)

    @classmethod
    def from_json(cls, data) -> "TimeProgram":
        if isinstance(data, (int, float)):
            return cls.constant(float(data))
        if not isinstance(data, dict) or "breakpoints" not in data:
            raise ValueError("time program must be a number or an object with 'breakpoints'")
        return cls.from_breakpoints(data["breakpoints"], data.get("period"))

    def to_json(self) -> dict:
        return {"breakpoints": [[float(t), float(v)] for t, v in zip(self.times, self.values)],
                "period": self.period}

    # -- evaluation ---------------------------------------------------------

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def _reduce(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is not None:
            return self.t_start + np.mod(t - self.t_start, self.period)
        tol = 1e-12 * max(1.0, abs(self.t_end))
        if np.any(t < self.t_start - tol) or np.any(t > self.t_end + tol):
            raise DomainError(f"t outside program domain [{self.t_start}, {self.t_end}]")
        return np.clip(t, self.t_start, self.t_end)

    def __call__(self, t):
        s = self._reduce(t)
        out = np.interp(s, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    eval = __call__

    def lipschitz_and_bounds(self) -> tuple[float, float, float]:
        """Return ``(max |slope|, min value, max value)``."""
        slopes = np.diff(self.values) / np.diff(self.times)
        return (float(np.max(np.abs(slopes))), float(np.min(self.values)),
                float(np.max(self.values)))

    def breakpoints_in(self, t0: float, t1: float) -> np.ndarray:
        """Breakpoint times (including periodic copies) inside ``[t0, t1]``."""
        if self.period is None:
            bt = self.times
        else:
            k0 = int(np.floor((t0 - self.t_start) / self.period)) - 1
            k1 = int(np.ceil((t1 - self.t_start) / self.period)) + 1
            shifts = self.period * np.arange(k0, k1 + 1)
            bt = (self.times[None, :] + shifts[:, None]).ravel()
        return bt[(bt >= t0) & (bt <= t1)]

    # -- transformations ----------------------------------------------------

    def reparametrize(self, factor: float) -> "TimeProgram":
        """Program ``t -> p(factor * t)`` (time runs ``factor`` times faster)."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        period = None if self.period is None else self.period / factor
        return TimeProgram(self.times / factor, self.values, period)

    def scaled(self, c: float) -> "TimeProgram":
        return TimeProgram(self.times, c * self.values, self.period)

    def shifted(self, dt: float) -> "TimeProgram":
        """Program ``t -> p(t - dt)``."""
        period = self.period
        return TimeProgram(self.times + dt, self.values, period)

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def __repr__(self):
        pts = ", ".join(f"({t:g}, {v:g})" for t, v in zip(self.times, self.values))
        return f"TimeProgram([{pts}], period={self.period})"


def merge_breakpoints(programs: Sequence[TimeProgram], t0: float, t1: float) -> np.ndarray:
    """Sorted union of all program breakpoints in ``[t0, t1]``, endpoints included."""
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    pieces = [np.array([t0, t1])]
    pieces += [p.breakpoints_in(t0, t1) for p in programs]
    pts = np.unique(np.concatenate(pieces))
    # collapse roundoff duplicates produced by periodic shifts
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, abs(t1))])
    pts = pts[keep]
    pts[-1] = t1
    return pts


def combine(programs: Sequence[TimeProgram], coeffs: Sequence[float]) -> TimeProgram:
    """Linear combination ``sum_j c_j p_j`` as a new time program.

    All programs must share the same domain (and period, when periodic).
    """
    if not programs:
        raise ValueError("need at least one program")
    p0 = programs[0]
    for p in programs[1:]:
        if p.period != p0.period or not (np.isclose(p.t_start, p0.t_start)
                                         and np.isclose(p.t_end, p0.t_end)):
            raise ValueError("programs must share domain and period")
    times = merge_breakpoints(programs, p0.t_start, p0.t_end)
    values = sum(c * np.asarray(p(times)) for p, c in zip(programs, coeffs))
    return TimeProgram(times, values, p0.period)
