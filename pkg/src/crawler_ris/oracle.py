"""Closed-form reference results for two-point, three-point and continuum crawlers.

Also provides the input schedules of the two-anchor strategies A, B and C
(periodic, unit cycle) so that simulations and closed forms use the same data.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .model import CrawlerModel
from .timeprog import TimeProgram

#: relative tolerance for declaring a parameter ratio to sit on a regime boundary
BOUNDARY_RTOL = 1e-12


class OracleBoundaryError(ValueError):
    """Parameters on an excluded regime boundary (or violating uniqueness)."""


@dataclass
class OracleResult:
    per_cycle_displacement: float
    switch_times: dict[str, float] = field(default_factory=dict)
    regime: str = ""
    boundary: bool = False
    transient: bool = False

    def to_json(self) -> dict:
        return asdict(self)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= BOUNDARY_RTOL * max(1.0, abs(a), abs(b))


def two_point_constant(k: float, mu_minus: float, mu_plus: float, dL: float) -> OracleResult:
    """Per-cycle displacement of the two-point crawler under a triangle-wave rest length.

    The rest length oscillates with amplitude ``dL``; the crawler advances by
    ``dL - 2 mu_min / k`` per cycle toward the lower-friction direction when
    this is positive.
    """
    if min(k, mu_minus, mu_plus, dL) <= 0:
        raise ValueError("k, mu_minus, mu_plus and dL must be positive")
    if _close(mu_minus, mu_plus):
        raise OracleBoundaryError("mu_minus == mu_plus: translation is not unique")
    mu_min = min(mu_minus, mu_plus)
    sign = 1.0 if mu_plus < mu_minus else -1.0
    excess = dL - 2.0 * mu_min / k
    if excess <= 0 or _close(dL, 2.0 * mu_min / k):
        return OracleResult(0.0, regime="stasis", boundary=_close(dL, 2.0 * mu_min / k))
    return OracleResult(sign * excess, regime="forward" if sign > 0 else "backward")


def three_point_regime(mu_minus: float, mu_plus: float) -> str:
    """``"one-way"`` or ``"two-way"`` motility of the homogeneous three-point chain."""
    if mu_minus <= 0 or mu_plus <= 0:
        raise ValueError("coefficients must be positive")
    if _close(mu_plus, 2 * mu_minus) or _close(mu_minus, 2 * mu_plus):
        raise OracleBoundaryError("ratio 2 violates uniqueness of the translation")
    if mu_plus > 2 * mu_minus or mu_minus > 2 * mu_plus:
        return "one-way"
    return "two-way"


def continuum_homogeneous(k: float, l: float, mu_minus: float, mu_plus: float,
                          d_eps: float) -> float:
    """Per-cycle displacement of the homogeneous continuum under uniform strain cycling.

    Friction densities ``mu_minus``/``mu_plus``; the strain oscillates between 0
    and ``d_eps``. Sign convention: positive means the ``+`` direction, so the
    result is positive when ``mu_plus < mu_minus``.
    """
    if min(k, l, mu_minus, mu_plus, d_eps) <= 0:
        raise ValueError("all parameters must be positive")
    if _close(mu_minus, mu_plus):
        return 0.0
    lo, hi = sorted((mu_minus, mu_plus))
    excess = d_eps - lo * l / k
    if excess <= 0:
        return 0.0
    sign = 1.0 if mu_plus < mu_minus else -1.0
    return sign * l * excess * (hi - lo) / (hi + lo)


# -- two-anchor strategies ---------------------------------------------------------

def strategy_result(which: str, k: float, mu: float, L_max: float) -> OracleResult:
    """Per-cycle displacement and slip-onset times of strategy A, B or C."""
    which = which.upper()
    if min(k, mu, L_max) <= 0:
        raise ValueError("k, mu and L_max must be positive")
    r = k * L_max / mu

    def on(x):
        return _close(r, x)

    if which == "A":
        if on(1.0):
            raise OracleBoundaryError("kL_max = mu violates the time-dependent uniqueness condition")
        if r < 1.0:
            return OracleResult(0.0, regime="stasis", transient=True)
        if r <= 2.0:
            return OracleResult(0.0, regime="stasis", boundary=on(2.0))
        if r <= 3.0:
            t2 = mu / (2 * (k * L_max - mu))
            return OracleResult(L_max - 2 * mu / k, {"t2": t2, "t2+1/2": 0.5 + t2},
                                "late-slip", boundary=on(3.0))
        t1 = mu / (k * L_max + mu)
        return OracleResult(L_max - 2 * mu / k, {"t1": t1, "t1+1/2": 0.5 + t1}, "early-slip")
    if which == "B":
        if r <= 1.0:
            return OracleResult(0.0, regime="stasis", boundary=on(1.0))
        if r <= 3.0:
            t4 = mu / (k * L_max + mu)
            return OracleResult(L_max - mu / k, {"t4": t4, "t4+1/2": 0.5 + t4},
                                "partial", boundary=on(3.0))
        t3 = mu / (2 * (k * L_max - mu))
        return OracleResult(2 * mu / k, {"t3": t3, "t3+1/2": 0.5 + t3}, "saturated")
    if which == "C":
        if r <= 2.0:
            return OracleResult(0.0, regime="stasis", boundary=on(2.0))
        t5 = mu / (2 * k * L_max)
        if r < 4.0:
            return OracleResult(L_max - 2 * mu / k, {"t5": t5, "t6": 0.5 + mu / (k * L_max)},
                                "late-contraction")
        t7 = 0.5 + 3 * mu / (2 * k * L_max + 4 * mu)
        return OracleResult(L_max - 2 * mu / k, {"t5": t5, "t7": t7},
                            "early-contraction", boundary=on(4.0))
    raise ValueError(f"unknown strategy {which!r}")


def _pl(points, scale=1.0):
    return TimeProgram([p[0] for p in points], [scale * p[1] for p in points], period=1.0)


def shape_actuation(L_max: float) -> TimeProgram:
    """Rest length rising linearly to ``L_max`` at mid-cycle and back to 0."""
    return TimeProgram.triangle(0.0, L_max, period=1.0)


def strategy_friction(which: str, mu: float) -> tuple[TimeProgram, TimeProgram]:
    """Isotropic friction schedules ``(mu_1(t), mu_2(t))`` of the given strategy."""
    which = which.upper()
    if which == "A":
        mu1 = [(0, 1.0), (0.25, 1.5), (0.75, 0.5), (1, 1.0)]
        mu2 = [(t, 2.0 - v) for t, v in mu1]
    elif which == "B":
        mu1 = [(0, 0.5), (0.5, 1.5), (1, 0.5)]
        mu2 = [(0, 1.5), (0.5, 0.5), (1, 1.5)]
    elif which == "C":
        mu1 = [(0, 0.5), (0.25, 1.5), (0.5, 1.5), (0.75, 0.5), (1, 0.5)]
        mu2 = [(0, 0.5), (0.25, 0.5), (0.5, 1.5), (0.75, 1.5), (1, 0.5)]
    else:
        raise ValueError(f"unknown strategy {which!r}")
    return _pl(mu1, mu), _pl(mu2, mu)


def strategy_model(which: str, k: float, mu: float, L_max: float) -> CrawlerModel:
    """Two-point crawler driven by strategy ``which``."""
    p1, p2 = strategy_friction(which, mu)
    return CrawlerModel.chain(2, k, shape_actuation(L_max), [p1, p2], [p1, p2])


def two_point_model(k: float, mu_minus: float, mu_plus: float, dL: float) -> CrawlerModel:
    """Two-point crawler with constant friction and triangle-wave rest length."""
    return CrawlerModel.chain(2, k, shape_actuation(dL), mu_minus, mu_plus)
