"""Emulation of a post-selected two-photon coincidence experiment.

Three ports each end in a pair of click detectors behind a balanced splitter:
port 1 (AUX1) is the reflection of BS1, port 0 (AUX2) the reflection of BS2,
and port 2 (OUT) the transmitted signal.  A click at either AUX1 detector
switches BS2 to full transmission for the same pulse.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fock import DomainError, check_unit
from .streams import binomial_inverse, check_seed, run_chunked, trial_uniforms

AUX2, AUX1, OUT = 0, 1, 2
DETECTORS = ("D0A", "D0B", "D1A", "D1B", "D2A", "D2B")
PAIRS: Tuple[Tuple[int, int], ...] = tuple(combinations(range(6), 2))
PAIR_NAMES = tuple(f"{DETECTORS[a]}-{DETECTORS[b]}" for a, b in PAIRS)
MAX_POISSON = 64
# draws per pulse: photon number, BS1, AUX1 thinning/split, BS2, AUX2 thinning/split,
# OUT thinning/split, 2 spare
DRAWS_PER_PULSE = 12
DEFAULT_MU = 0.05


def port_of(detector: int) -> int:
    return detector // 2


@dataclass(frozen=True)
class SourceModel:
    """Either the Fock state |2> or a coherent state with mean photon number mu."""

    kind: str = "coherent"
    mu: float = DEFAULT_MU

    def __post_init__(self):
        if self.kind not in ("fock2", "coherent"):
            raise DomainError(f"unknown source {self.kind!r}")
        if self.kind == "coherent" and not self.mu > 0.0:
            raise DomainError(f"coherent source needs mu > 0, got {self.mu!r}")

    @classmethod
    def fock2(cls) -> "SourceModel":
        return cls("fock2", 2.0)

    @classmethod
    def coherent(cls, mu: float = DEFAULT_MU) -> "SourceModel":
        return cls("coherent", float(mu))


@dataclass(frozen=True)
class PortLosses:
    aux1: float = 1.0
    aux2: float = 1.0
    out: float = 1.0

    def __post_init__(self):
        for name in ("aux1", "aux2", "out"):
            v = check_unit(name, getattr(self, name))
            if v == 0.0:
                raise DomainError(f"{name} port transmittance must be positive")

    @classmethod
    def balanced(cls, t: float) -> "PortLosses":
        return cls(t, t, t)

    def by_port(self) -> Tuple[float, float, float]:
        return (self.aux2, self.aux1, self.out)


@dataclass
class CoincidenceCounts:
    singles: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=np.int64))
    pairs: np.ndarray = field(default_factory=lambda: np.zeros(len(PAIRS), dtype=np.int64))
    higher: int = 0
    pulses: int = 0
    source: Optional[SourceModel] = None
    # emulator-only ground truth: two-click events from pulses with >= 3 photons
    true_spurious: int = 0

    def merge(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        return CoincidenceCounts(
            self.singles + other.singles,
            self.pairs + other.pairs,
            self.higher + other.higher,
            self.pulses + other.pulses,
            self.source or other.source,
            self.true_spurious + other.true_spurious,
        )

    def pair(self, a: str, b: str) -> int:
        i, j = sorted((DETECTORS.index(a), DETECTORS.index(b)))
        return int(self.pairs[PAIRS.index((i, j))])

    def to_json(self) -> dict:
        return {
            "singles": {d: int(n) for d, n in zip(DETECTORS, self.singles)},
            "pairs": {name: int(n) for name, n in zip(PAIR_NAMES, self.pairs)},
            "higher": int(self.higher),
            "pulses": int(self.pulses),
        }

    @classmethod
    def from_json(cls, data: dict, source: SourceModel | None = None) -> "CoincidenceCounts":
        singles = np.array([int(data["singles"].get(d, 0)) for d in DETECTORS], dtype=np.int64)
        pairs = np.zeros(len(PAIRS), dtype=np.int64)
        for key, n in data["pairs"].items():
            a, b = key.split("-")
            i, j = sorted((DETECTORS.index(a), DETECTORS.index(b)))
            pairs[PAIRS.index((i, j))] += int(n)
        return cls(singles, pairs, int(data.get("higher", 0)), int(data.get("pulses", 0)), source)


def _split_clicks(u: np.ndarray, n: np.ndarray):
    """Clicks on detectors A and B when n photons meet a balanced splitter."""
    on_a = binomial_inverse(u, n, 0.5)
    return on_a > 0, (n - on_a) > 0


def _poisson_inverse(u: np.ndarray, mu: float) -> np.ndarray:
    out = np.zeros(u.shape, dtype=np.int64)
    pmf, cdf = math.exp(-mu), 0.0
    for k in range(MAX_POISSON):
        cdf += pmf
        out += (u >= cdf).astype(np.int64)
        pmf *= mu / (k + 1)
    return out


def _pulse_batch(source, t1, t2, losses, det_eta, feedforward, u) -> CoincidenceCounts:
    n = u.shape[0]
    if source.kind == "fock2":
        photons = np.full(n, 2, dtype=np.int64)
    else:
        photons = _poisson_inverse(u[:, 0], source.mu)
    eff = [l * det_eta for l in losses.by_port()]

    aux1 = binomial_inverse(u[:, 1], photons, 1.0 - t1)
    rest = photons - aux1
    aux1_seen = binomial_inverse(u[:, 2], aux1, eff[AUX1])
    d1a, d1b = _split_clicks(u[:, 3], aux1_seen)

    switched = (d1a | d1b) if feedforward else np.zeros(n, dtype=bool)
    t2_eff = np.where(switched, 1.0, t2)
    aux2 = binomial_inverse(u[:, 4], rest, 1.0 - t2_eff)
    out = rest - aux2
    d0a, d0b = _split_clicks(u[:, 6], binomial_inverse(u[:, 5], aux2, eff[AUX2]))
    d2a, d2b = _split_clicks(u[:, 8], binomial_inverse(u[:, 7], out, eff[OUT]))

    clicks = np.stack([d0a, d0b, d1a, d1b, d2a, d2b], axis=1)
    n_clicks = clicks.sum(axis=1)
    two = n_clicks == 2
    pairs = np.array([int(np.count_nonzero(two & clicks[:, a] & clicks[:, b])) for a, b in PAIRS], dtype=np.int64)
    return CoincidenceCounts(
        clicks.sum(axis=0).astype(np.int64),
        pairs,
        int(np.count_nonzero(n_clicks >= 3)),
        n,
        source,
        int(np.count_nonzero(two & (photons >= 3))),
    )


def run_pulses(
    source: SourceModel,
    t1: float,
    t2: float,
    losses: PortLosses | None = None,
    det_eta: float = 1.0,
    n_pulses: int = 1_000_000,
    seed: int = 0,
    feedforward: bool = True,
    threads: int = 1,
) -> CoincidenceCounts:
    """Emulate ``n_pulses`` pulses.  With feedforward off BS2 stays at ``t2``."""
    t1, t2, det_eta = check_unit("t1", t1), check_unit("t2", t2), check_unit("det_eta", det_eta)
    losses = PortLosses() if losses is None else losses
    if int(n_pulses) != n_pulses or n_pulses < 1:
        raise DomainError(f"n_pulses must be a positive integer, got {n_pulses!r}")
    seed = check_seed(seed)

    def work(start: int, count: int) -> CoincidenceCounts:
        u = trial_uniforms(seed, start, count, DRAWS_PER_PULSE)
        return _pulse_batch(source, t1, t2, losses, det_eta, feedforward, u)

    total = CoincidenceCounts(source=source)
    for part in run_chunked(work, int(n_pulses), threads):
        total = total.merge(part)
    return total


@dataclass(frozen=True)
class PairTag:
    successful: bool
    weight: int


def tag_pair(a: int, b: int) -> PairTag:
    """Classification of a two-click event on detectors a and b.

    Same-port pairs are only seen half the time two photons share a port, so
    they carry weight 2.  Success needs one photon at OUT and the other at an
    auxiliary port.
    """
    pa, pb = port_of(a), port_of(b)
    if pa == pb:
        return PairTag(False, 2)
    return PairTag(OUT in (pa, pb), 1)


def tag(counts: CoincidenceCounts) -> Tuple[int, int]:
    """Weighted (successful, unsuccessful) coincidence counts."""
    succ = unsucc = 0
    for (a, b), n in zip(PAIRS, counts.pairs):
        t = tag_pair(a, b)
        if t.successful:
            succ += t.weight * int(n)
        else:
            unsucc += t.weight * int(n)
    return succ, unsucc


def effective_transmittance(counts: CoincidenceCounts) -> Tuple[float, float]:
    """Singles-based BS1 transmittance (AUX2 + OUT over all ports) and its
    binomial standard error."""
    s = counts.singles
    total = int(s.sum())
    if total == 0:
        raise DomainError("no singles recorded; effective transmittance undefined")
    num = int(s[0] + s[1] + s[4] + s[5])
    T = num / total
    return T, math.sqrt(T * (1.0 - T) / total)


def effective_success(counts: CoincidenceCounts) -> Tuple[float, float]:
    """Ratio of weighted successful to all weighted coincidences, with a
    delta-method standard error treating each pair class as Poisson."""
    succ = var_s = unsucc = var_u = 0.0
    for (a, b), n in zip(PAIRS, counts.pairs):
        t = tag_pair(a, b)
        if t.successful:
            succ += t.weight * n
            var_s += t.weight**2 * n
        else:
            unsucc += t.weight * n
            var_u += t.weight**2 * n
    total = succ + unsucc
    if total == 0:
        raise DomainError("no coincidences recorded; success probability undefined")
    P = succ / total
    se = math.sqrt(unsucc**2 * var_s + succ**2 * var_u) / total**2
    return P, se


def _click_pattern_probs(q: np.ndarray):
    """For photons landing independently on detectors with probabilities q:
    P(2 distinct | 2), P(2 distinct | 3), P(3 distinct | 3)."""
    s2, s3 = float(np.sum(q**2)), float(np.sum(q**3))
    return 1.0 - s2, 3.0 * (s2 - s3), 1.0 - 3.0 * s2 + 2.0 * s3


def spurious_fraction(counts: CoincidenceCounts) -> float:
    """Estimated share of two-click events caused by pulses with >= 3 photons.

    Three-photon pulses are counted through the >=3-click tally, then scaled
    to the rate at which they instead produce exactly two clicks (one photon
    lost, or two photons on one detector).  The per-photon detection
    probability is read off the singles rate and the Poisson mean.
    """
    if counts.source is not None and counts.source.kind == "fock2":
        return 0.0
    n_pairs = int(counts.pairs.sum())
    if n_pairs == 0 or counts.higher == 0:
        return 0.0
    if counts.source is None or counts.pulses == 0:
        raise DomainError("spurious estimate needs the source mean photon number and pulse count")
    mu = counts.source.mu
    singles = counts.singles.astype(float)
    q = singles / singles.sum()
    e = min(1.0, float(singles.sum()) / (counts.pulses * mu))
    _, two_of_three, three_of_three = _click_pattern_probs(q)
    p3 = e**3 * three_of_three
    p2 = 3.0 * e**2 * (1.0 - e) * (1.0 - float(np.sum(q**2))) + e**3 * two_of_three
    return min(1.0, counts.higher * p2 / p3 / n_pairs)


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    t1: float
    T_eff: float
    T_eff_se: float
    P_exp: float
    se: float


def sweep(
    source: SourceModel,
    t1_values: Sequence[float],
    t2: float,
    losses: PortLosses | None = None,
    det_eta: float = 1.0,
    n_pulses: int = 1_000_000,
    seed: int = 0,
    feedforward: bool = True,
    threads: int = 1,
) -> List[SweepRow]:
    """P_exp against T_eff over a list of BS1 settings; point i uses seed + i."""
    rows = []
    for i, t1 in enumerate(t1_values):
        counts = run_pulses(source, t1, t2, losses, det_eta, n_pulses, seed + i, feedforward, threads)
        T, T_se = effective_transmittance(counts)
        P, se = effective_success(counts)
        rows.append(SweepRow("k=2" if feedforward else "k=1", float(t1), T, T_se, P, se))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["T_eff", "P_exp", "SE", "scheme"])
    for r in rows:
        writer.writerow([f"{r.T_eff:.6g}", f"{r.P_exp:.6g}", f"{r.se:.6g}", r.scheme])
    return buf.getvalue()
