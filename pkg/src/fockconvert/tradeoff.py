"""Success probability vs. single-photon fraction for |2> -> |1> conversion
with inefficient detectors (efficiency eta) and a lossy switchable stage
(transmittance eta_O between the two beam splitters)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import DomainError, check_unit

ELEMENTARY = "elementary"
FEEDFORWARD = "feedforward"

CONSTRAINT_TOL = 1e-6
T1_STEP = 1e-3


class InfeasibleTarget(ValueError):
    """The requested success probability exceeds what the scheme can reach."""

    def __init__(self, target: float, achievable: float):
        super().__init__(f"target P={target:.6g} exceeds the achievable maximum {achievable:.6g}")
        self.target = target
        self.achievable = achievable


@dataclass(frozen=True)
class TradeoffPoint:
    P: float
    p1: float
    T1: float
    T2: Optional[float]
    eta: float
    eta_O: float
    scheme: str = FEEDFORWARD

    @property
    def settings(self):
        return self.T1 if self.T2 is None else (self.T1, self.T2)


def elementary_point(T: float, eta: float) -> TradeoffPoint:
    T, eta = check_unit("T", T), check_unit("eta", eta)
    denom = 1.0 - (1.0 - T) * eta
    P = 2.0 * eta * (1.0 - T) * denom
    p1 = T / denom if P > 0.0 else 0.0
    return TradeoffPoint(P, p1, T, None, eta, 1.0, ELEMENTARY)


def _ff_terms(T1, T2, eta, eta_O):
    """Denominator and numerator of the single-photon fraction (P = 2*eta*denom)."""
    s = eta_O * T1 * (1.0 - T2)
    denom = (
        1.0 - T1 - eta
        + eta * T1 * (2.0 - T1 - eta_O * (1.0 - T2) * (1.0 - T1 + s))
        + s
    )
    numer = eta_O * T1 * (1.0 - T1 + eta_O * T1 * T2 * (1.0 - T2))
    return denom, numer


def ff_probability(T1, T2, eta, eta_O):
    """Vectorized success probability of the switched two-stage scheme."""
    denom, _ = _ff_terms(T1, T2, eta, eta_O)
    return 2.0 * eta * denom


def ff_fraction(T1, T2, eta, eta_O):
    denom, numer = _ff_terms(T1, T2, eta, eta_O)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0.0, numer / np.where(denom > 0.0, denom, 1.0), 0.0)


def feedforward_point(T1: float, T2: float, eta: float, eta_O: float) -> TradeoffPoint:
    T1, T2 = check_unit("T1", T1), check_unit("T2", T2)
    eta, eta_O = check_unit("eta", eta), check_unit("eta_O", eta_O)
    denom, numer = _ff_terms(T1, T2, eta, eta_O)
    P = 2.0 * eta * denom
    # 0/0 at vanishing rate is reported as p1 = 0
    p1 = numer / denom if P > 0.0 else 0.0
    return TradeoffPoint(P, p1, T1, T2, eta, eta_O, FEEDFORWARD)


def closed_form_optimum(eta: float, eta_O: float) -> Optional[TradeoffPoint]:
    """Maximum-probability settings when eta_O*(3*eta - 1) >= 1, else None."""
    gate = eta_O * (3.0 * eta - 1.0)
    if gate < 1.0:
        return None
    T1 = (3.0 * eta - 1.0) / (3.0 * eta)
    T2 = 1.0 - 1.0 / gate
    p1 = 2.0 * eta_O - (1.0 + 2.0 * eta_O) / (3.0 * eta)
    return TradeoffPoint(2.0 / 3.0, p1, T1, T2, eta, eta_O, FEEDFORWARD)


def _quadratic_in_x(T1, eta, eta_O):
    """P / (2 eta) = a + b x - c x^2 with x = 1 - T2."""
    a = 1.0 - T1 - eta + eta * T1 * (2.0 - T1)
    b = eta_O * T1 * (1.0 - eta * (1.0 - T1))
    c = eta * eta_O**2 * T1**2
    return a, b, c


def _best_t2(T1, eta, eta_O):
    _, b, c = _quadratic_in_x(T1, eta, eta_O)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(c > 0.0, b / np.where(c > 0.0, 2.0 * c, 1.0), np.where(b > 0.0, 1.0, 0.0))
    return 1.0 - np.clip(x, 0.0, 1.0)


def max_feedforward_probability(eta: float, eta_O: float) -> TradeoffPoint:
    """Settings maximizing the success probability over the (T1, T2) square.

    For fixed T1 the best T2 is the clipped vertex of a parabola; the
    remaining 1-D profile is scanned on a grid and refined by Brent's method.
    """
    eta, eta_O = check_unit("eta", eta), check_unit("eta_O", eta_O)
    profile = lambda t1: ff_probability(t1, _best_t2(t1, eta, eta_O), eta, eta_O)
    g = np.linspace(0.0, 1.0, 1001)
    vals = profile(g)
    i = int(np.argmax(vals))
    T1 = float(g[i])
    res = minimize_scalar(
        lambda t: -float(profile(t)),
        bounds=(g[max(i - 1, 0)], g[min(i + 1, len(g) - 1)]),
        method="bounded",
        options={"xatol": 1e-13},
    )
    if -res.fun >= vals[i]:
        T1 = float(res.x)
    return feedforward_point(T1, float(_best_t2(T1, eta, eta_O)), eta, eta_O)


def _constraint_points(t1_grid, target, eta, eta_O):
    """All (T1, T2) with T1 on the grid and P(T1, T2) = target."""
    a, b, c = _quadratic_in_x(np.asarray(t1_grid, dtype=float), eta, eta_O)
    a = a - target / (2.0 * eta) if eta > 0 else a - np.inf
    T1s, xs = [], []
    quad = c > 0.0
    disc = b * b + 4.0 * c * a
    ok = quad & (disc >= 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    for sign in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (b + sign * sq) / np.where(ok, 2.0 * c, 1.0)
        keep = ok & (x >= 0.0) & (x <= 1.0)
        if sign > 0:
            keep &= disc > 0.0
        T1s.append(t1_grid[keep])
        xs.append(x[keep])
    lin = ~quad & (b != 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = -a / np.where(lin, b, 1.0)
    keep = lin & (x >= 0.0) & (x <= 1.0)
    T1s.append(t1_grid[keep])
    xs.append(x[keep])
    return np.concatenate(T1s), 1.0 - np.concatenate(xs)


def _t2_roots(T1: float, target: float, eta: float, eta_O: float) -> List[float]:
    _, T2s = _constraint_points(np.array([float(T1)]), target, eta, eta_O)
    return [float(t) for t in T2s]


def _t2_near(T1: float, guess: float, target: float, eta: float, eta_O: float) -> Optional[float]:
    """Root of P(T1, .) = target on the branch closest to ``guess``."""
    roots = _t2_roots(T1, target, eta, eta_O)
    if not roots:
        return None
    return min(roots, key=lambda r: abs(r - guess))


def optimize_feedforward(eta: float, eta_O: float, target_P: float) -> Tuple[float, float, float]:
    """Settings (T1, T2) maximizing the single-photon fraction subject to a
    success probability of ``target_P``; returns (T1, T2, p1_max).

    The constraint is solved for T2 on every branch over a T1 grid (step
    1e-3), and the best point is polished along its branch.

    Raises InfeasibleTarget when target_P exceeds the scheme's maximum.  At
    target_P = 0 the vanishing-rate limit p1 -> eta_O is returned with both
    splitters transparent.
    """
    eta, eta_O = check_unit("eta", eta), check_unit("eta_O", eta_O)
    target_P = check_unit("target_P", target_P)
    best = max_feedforward_probability(eta, eta_O)
    if target_P > best.P + 1e-9:
        raise InfeasibleTarget(target_P, best.P)
    if target_P >= best.P - 1e-9:
        return best.T1, best.T2, best.p1
    if target_P == 0.0:
        return 1.0, 1.0, eta_O

    # outer scan over T1, every T2 branch solving the constraint
    t1_grid = np.linspace(0.0, 1.0, int(round(1.0 / T1_STEP)) + 1)
    T1s, T2s = _constraint_points(t1_grid, target_P, eta, eta_O)
    if T1s.size == 0:
        raise InfeasibleTarget(target_P, best.P)
    fractions = ff_fraction(T1s, T2s, eta, eta_O)
    i = int(np.argmax(fractions))
    p1, T1, T2 = float(fractions[i]), float(T1s[i]), float(T2s[i])

    def neg_p1(t1):
        t2 = _t2_near(t1, T2, target_P, eta, eta_O)
        if t2 is None:
            return 1.0
        return -float(ff_fraction(t1, t2, eta, eta_O))

    lo, hi = max(0.0, T1 - 2 * T1_STEP), min(1.0, T1 + 2 * T1_STEP)
    res = minimize_scalar(neg_p1, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -res.fun > p1:
        T1 = float(res.x)
        T2 = _t2_near(T1, T2, target_P, eta, eta_O)
        p1 = -float(res.fun)
    return T1, T2, p1


def optimize_elementary(eta: float, target_P: float) -> TradeoffPoint:
    """Largest-p1 single-splitter setting reaching success probability target_P."""
    eta, target_P = check_unit("eta", eta), check_unit("target_P", target_P)
    p_max = elementary_max_probability(eta)
    if target_P > p_max + 1e-12:
        raise InfeasibleTarget(target_P, p_max)
    if target_P == 0.0:
        return TradeoffPoint(0.0, 1.0, 1.0, None, eta, 1.0, ELEMENTARY)
    # P = 2x(1-x) with x = eta*(1-T); the smaller root keeps the larger p1
    x = 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 2.0 * min(target_P, 0.5))))
    T = min(1.0, max(0.0, 1.0 - x / eta))
    return elementary_point(T, eta)


def elementary_max_probability(eta: float) -> float:
    return 0.5 if eta >= 0.5 else 2.0 * eta * (1.0 - eta)


def tradeoff_curve(eta: float, eta_O: float, n_points: int) -> List[TradeoffPoint]:
    """Pareto frontiers (max p1 at each P) of both schemes, P from 0 to each maximum."""
    if int(n_points) != n_points or n_points < 2:
        raise DomainError(f"n_points must be an integer >= 2, got {n_points!r}")
    eta, eta_O = check_unit("eta", eta), check_unit("eta_O", eta_O)
    points = [optimize_elementary(eta, P) for P in np.linspace(0.0, elementary_max_probability(eta), n_points)]
    p_ff = max_feedforward_probability(eta, eta_O).P
    for P in np.linspace(0.0, p_ff, n_points):
        T1, T2, p1 = optimize_feedforward(eta, eta_O, min(float(P), p_ff))
        P_real = float(P) if 0.0 < P < p_ff else feedforward_point(T1, T2, eta, eta_O).P
        points.append(TradeoffPoint(P_real, p1, T1, T2, eta, eta_O, FEEDFORWARD))
    return points


def curve_to_csv(points: List[TradeoffPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scheme", "eta", "eta_O", "T1", "T2", "P", "p1"])
    for pt in points:
        T2 = "" if pt.T2 is None else f"{pt.T2:.6g}"
        writer.writerow([pt.scheme, f"{pt.eta:.6g}", f"{pt.eta_O:.6g}", f"{pt.T1:.6g}", T2, f"{pt.P:.6g}", f"{pt.p1:.6g}"])
    return buf.getvalue()
