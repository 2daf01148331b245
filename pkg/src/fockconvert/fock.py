"""Photon-number (diagonal Fock basis) primitives.

Every state handled by this package is a Fock state or a loss-degraded
Fock state, and every measurement is photon counting, so states are
represented as probability distributions over photon number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Tuple

import numpy as np

MAX_PHOTONS = 64
NORM_TOL = 1e-9


class DomainError(ValueError):
    """Raised when an argument lies outside its physical domain."""


def check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_photons(name: str, value: int) -> int:
    if int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    if value > MAX_PHOTONS:
        raise DomainError(f"{name}={value} exceeds the photon-number cap {MAX_PHOTONS}")
    return int(value)


@lru_cache(maxsize=None)
def binomial_table(n_max: int = MAX_PHOTONS) -> np.ndarray:
    """Exact integer binomial coefficients C(n, j), converted to float."""
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for j in range(n + 1):
            table[n, j] = float(math.comb(n, j))
    table.setflags(write=False)
    return table


def binomial_kernel(n_max: int, p: float) -> np.ndarray:
    """Matrix K[c, j] = C(c, j) p^j (1-p)^(c-j) for 0 <= j <= c <= n_max."""
    c = np.arange(n_max + 1)[:, None]
    j = np.arange(n_max + 1)[None, :]
    comb = binomial_table()[: n_max + 1, : n_max + 1]
    with np.errstate(invalid="ignore"):
        k = comb * np.power(p, j) * np.power(1.0 - p, np.clip(c - j, 0, None))
    k[j > c] = 0.0
    return k


@dataclass(frozen=True)
class PhotonNumberMixture:
    """Normalized distribution over photon numbers 0..max_photons."""

    probs: Tuple[float, ...]
    max_photons: int = field(default=-1)

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        cap = self.max_photons if self.max_photons >= 0 else len(probs) - 1
        if cap > MAX_PHOTONS:
            raise DomainError(f"max_photons={cap} exceeds {MAX_PHOTONS}")
        if len(probs) > cap + 1:
            if any(p != 0.0 for p in probs[cap + 1:]):
                raise DomainError("photon number above max_photons carries weight")
            probs = probs[: cap + 1]
        probs = probs + (0.0,) * (cap + 1 - len(probs))
        if any(p < 0.0 or math.isnan(p) for p in probs):
            raise DomainError("probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > NORM_TOL:
            raise DomainError(f"probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "max_photons", cap)

    @classmethod
    def fock(cls, n: int, max_photons: int | None = None) -> "PhotonNumberMixture":
        n = check_photons("n", n)
        probs = [0.0] * (n + 1)
        probs[n] = 1.0
        return cls(tuple(probs), n if max_photons is None else max_photons)

    @classmethod
    def from_dict(cls, probs: Mapping[int, float], max_photons: int | None = None):
        keys = [check_photons("photon number", int(k)) for k in probs]
        cap = max(keys, default=0) if max_photons is None else max_photons
        dense = [0.0] * (max(cap, max(keys, default=0)) + 1)
        for k, p in probs.items():
            dense[int(k)] += float(p)
        return cls(tuple(dense), cap)

    @classmethod
    def from_weights(cls, weights) -> Tuple[float, "PhotonNumberMixture | None"]:
        """Normalize an unnormalized accumulator; returns (total weight, mixture).

        The mixture is None when the total weight is zero.
        """
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = float(w.sum())
        if total <= 0.0:
            return 0.0, None
        return total, cls(tuple(w / total), len(w) - 1)

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)

    def __getitem__(self, n: int) -> float:
        return self.probs[n] if 0 <= n < len(self.probs) else 0.0

    def mean(self) -> float:
        return float(sum(n * p for n, p in enumerate(self.probs)))

    def to_dict(self) -> Dict[int, float]:
        return {n: p for n, p in enumerate(self.probs) if p != 0.0}

    def to_json(self) -> Dict[str, float]:
        return {str(n): p for n, p in self.to_dict().items()}


@dataclass(frozen=True)
class BeamSplitter:
    """Beam splitter described by its intensity transmittance T = t^2 = 1 - r^2."""

    T: float

    def __post_init__(self):
        object.__setattr__(self, "T", check_unit("T", self.T))


@dataclass(frozen=True)
class LossChannel:
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "eta", check_unit("eta", self.eta))


IDEAL_PNR = "ideal_pnr"
INEFFICIENT_PNR = "inefficient_pnr"
CLICK_PAIR = "click_pair"


@dataclass(frozen=True)
class DetectorModel:
    """Photon counter: ideal PNR, PNR behind a loss channel, or two click detectors
    behind a balanced splitter (outcome = number of clicks)."""

    variant: str = IDEAL_PNR
    eta: float = 1.0

    def __post_init__(self):
        if self.variant not in (IDEAL_PNR, INEFFICIENT_PNR, CLICK_PAIR):
            raise DomainError(f"unknown detector variant {self.variant!r}")
        eta = check_unit("eta", self.eta)
        if self.variant == IDEAL_PNR and eta != 1.0:
            raise DomainError("an ideal PNR detector has unit efficiency")
        object.__setattr__(self, "eta", eta)

    @property
    def max_outcome(self) -> int | None:
        return 2 if self.variant == CLICK_PAIR else None

    def outcome_matrix(self, n_max: int) -> np.ndarray:
        """M[n, o]: probability of outcome o when n photons reach the detector."""
        thin = binomial_kernel(n_max, self.eta)
        if self.variant != CLICK_PAIR:
            return thin
        clicks = np.zeros((n_max + 1, 3))
        clicks[0, 0] = 1.0
        for n in range(1, n_max + 1):
            both = 1.0 - 2.0 ** (1 - n)
            clicks[n, 1] = 1.0 - both
            clicks[n, 2] = both
        out = np.zeros((n_max + 1, max(n_max + 1, 3)))
        out[:, :3] = thin @ clicks
        return out

    def to_json(self) -> dict:
        return {"variant": self.variant, "eta": self.eta}


def IdealPNR() -> DetectorModel:
    return DetectorModel(IDEAL_PNR, 1.0)


def InefficientPNR(eta: float) -> DetectorModel:
    return DetectorModel(INEFFICIENT_PNR, eta)


def ClickPair(eta: float = 1.0) -> DetectorModel:
    return DetectorModel(CLICK_PAIR, eta)


def splitting_distribution(m: int, T: float) -> Dict[Tuple[int, int], float]:
    """Joint distribution of (transmitted, reflected) photon counts when |m> hits
    a beam splitter of transmittance T."""
    m = check_photons("m", m)
    T = BeamSplitter(T).T
    comb = binomial_table()
    return {
        (m - j, j): comb[m, j] * T ** (m - j) * (1.0 - T) ** j for j in range(m + 1)
    }


def apply_loss(state: PhotonNumberMixture, eta: float) -> PhotonNumberMixture:
    """Binomial thinning of every photon with survival probability eta."""
    eta = LossChannel(eta).eta
    p = state.as_array()
    out = p @ binomial_kernel(state.max_photons, eta)
    out /= out.sum()
    return PhotonNumberMixture(tuple(out), state.max_photons)


@dataclass(frozen=True)
class DetectionOutcome:
    label: int
    prob: float
    # conditional distribution of photons absorbed by the detector
    removed: PhotonNumberMixture | None


def detect(state: PhotonNumberMixture, det: DetectorModel) -> List[DetectionOutcome]:
    """Outcome distribution of a destructive photon-counting measurement.

    Outcomes with zero probability are dropped; the list is ordered from the
    highest outcome label to the lowest.
    """
    p = state.as_array()
    joint = p[:, None] * det.outcome_matrix(state.max_photons)
    results = []
    for label in range(joint.shape[1] - 1, -1, -1):
        prob = float(joint[:, label].sum())
        if prob <= 0.0:
            continue
        _, removed = PhotonNumberMixture.from_weights(joint[:, label])
        results.append(DetectionOutcome(label, prob, removed))
    return results
