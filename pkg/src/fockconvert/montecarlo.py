"""Monte Carlo simulation of adaptive subtraction policies.

Each trial draws 4 uniforms per stage, in the order
(loss before the stage, beam-splitter reflection, detector thinning,
click-pair split).  Unused draws are still consumed so that trial ``i``
always reads the same block of its seed's stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import IO, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .fock import (
    CLICK_PAIR,
    DetectorModel,
    DomainError,
    IdealPNR,
    PhotonNumberMixture,
    binomial_table,
    check_photons,
    check_unit,
)
from .planner import FAILED, PASS_THROUGH, Policy, PolicyNode
from .streams import binomial_inverse, check_seed, run_chunked, trial_uniforms

DRAWS_PER_STAGE = 4


@dataclass(frozen=True)
class TrajectoryRecord:
    outcomes: Tuple[int, ...]
    success: bool
    output_photons: int
    transmittances: Tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_trials: int
    seed: int

    @classmethod
    def from_counts(cls, hits: int, n: int, seed: int) -> "Estimate":
        p = hits / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), n, seed)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: Estimate
    output: Optional[PhotonNumberMixture]
    output_counts: Tuple[int, ...]

    def to_json(self) -> dict:
        out = {"estimate": self.estimate.to_json(), "output_counts": list(self.output_counts)}
        out["output"] = None if self.output is None else self.output.to_json()
        return out


def _binomial_scalar(u: float, n: int, p: float) -> int:
    comb = binomial_table()
    cdf, out = 0.0, 0
    for j in range(n):
        cdf += comb[n, j] * p**j * (1.0 - p) ** (n - j)
        if u >= cdf:
            out += 1
    return out


def _detector_outcome_scalar(j: int, det: DetectorModel, u_thin: float, u_click: float) -> int:
    hits = _binomial_scalar(u_thin, j, det.eta)
    if det.variant != CLICK_PAIR or hits == 0:
        return hits
    return 2 if u_click < 1.0 - 2.0 ** (1 - hits) else 1


def stream_width(depth: int) -> int:
    return DRAWS_PER_STAGE * depth


def simulate_trajectory(
    policy: Policy,
    m: int,
    det: DetectorModel,
    eta_O: float,
    draws: Sequence[float],
) -> TrajectoryRecord:
    """One trial, consuming ``draws`` (the trial's substream, see trial_uniforms)."""
    target = m - policy.n
    node: PolicyNode = policy.root
    photons, subtracted = m, 0
    outcomes: List[int] = []
    used: List[float] = []
    for stage in range(policy.depth):
        u_loss, u_refl, u_thin, u_click = draws[DRAWS_PER_STAGE * stage: DRAWS_PER_STAGE * (stage + 1)]
        if stage > 0:
            photons = _binomial_scalar(u_loss, photons, eta_O)
        if node.status == FAILED:
            return TrajectoryRecord(tuple(outcomes), False, photons, tuple(used))
        used.append(node.T)
        reflected = _binomial_scalar(u_refl, photons, 1.0 - node.T)
        photons -= reflected
        outcome = _detector_outcome_scalar(reflected, det, u_thin, u_click)
        outcomes.append(outcome)
        subtracted += outcome
        if subtracted > target:
            return TrajectoryRecord(tuple(outcomes), False, photons, tuple(used))
        node = node.children.get(outcome, PASS_THROUGH)
    return TrajectoryRecord(tuple(outcomes), subtracted == target, photons, tuple(used))


def _compile(policy: Policy, n_out: int):
    """Flatten the tree: node 0 is the transparent pass-through node."""
    T, failed, children = [1.0], [False], [[0] * n_out]
    stack = [(policy.root, None, None)]
    ids = {}
    while stack:
        node, parent, outcome = stack.pop()
        if id(node) not in ids:
            ids[id(node)] = len(T)
            T.append(node.T)
            failed.append(node.status == FAILED)
            children.append([0] * n_out)
            for o, child in node.children.items():
                if o < n_out:
                    stack.append((child, ids[id(node)], o))
        if parent is not None:
            children[parent][outcome] = ids[id(node)]
    return np.array(T), np.array(failed), np.array(children, dtype=np.int64)


def simulate_batch(policy: Policy, m: int, det: DetectorModel, eta_O: float, u: np.ndarray):
    """Vectorized trials; row i of ``u`` is trial i's substream.

    Returns (success, output photons, outcomes, transmittances); outcome and
    transmittance entries are -1 / NaN for stages a trial never reached.
    """
    n_trials = u.shape[0]
    target = m - policy.n
    n_out = m + 1 if det.variant != CLICK_PAIR else max(3, m + 1)
    T_arr, failed_arr, child = _compile(policy, n_out)
    node = np.full(n_trials, 1, dtype=np.int64)
    photons = np.full(n_trials, m, dtype=np.int64)
    subtracted = np.zeros(n_trials, dtype=np.int64)
    alive = np.ones(n_trials, dtype=bool)
    outcomes = np.full((n_trials, policy.depth), -1, dtype=np.int64)
    used = np.full((n_trials, policy.depth), np.nan)
    for stage in range(policy.depth):
        cols = u[:, DRAWS_PER_STAGE * stage: DRAWS_PER_STAGE * (stage + 1)]
        if stage > 0:
            photons = np.where(alive, binomial_inverse(cols[:, 0], photons, eta_O), photons)
        alive &= ~failed_arr[node]
        T = T_arr[node]
        reflected = np.where(alive, binomial_inverse(cols[:, 1], photons, 1.0 - T), 0)
        photons = photons - reflected
        hits = binomial_inverse(cols[:, 2], reflected, det.eta)
        if det.variant == CLICK_PAIR:
            both = cols[:, 3] < 1.0 - np.power(2.0, 1 - np.maximum(hits, 1))
            outcome = np.where(hits == 0, 0, np.where(both, 2, 1))
        else:
            outcome = hits
        outcomes[alive, stage] = outcome[alive]
        used[alive, stage] = T[alive]
        subtracted = subtracted + np.where(alive, outcome, 0)
        alive &= subtracted <= target
        node = np.where(alive, child[node, np.minimum(outcome, n_out - 1)], node)
    success = alive & (subtracted == target)
    return success, photons, outcomes, used


def _validate(policy: Policy, m: int, det: DetectorModel | None, eta_O: float):
    m = check_photons("m", m)
    if m < policy.n:
        raise DomainError(f"input |{m}> has fewer photons than the target |{policy.n}>")
    return m, IdealPNR() if det is None else det, check_unit("eta_O", eta_O)


def estimate_success(
    policy: Policy,
    m: int | None = None,
    det: DetectorModel | None = None,
    eta_O: float = 1.0,
    n_trials: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> MonteCarloResult:
    """Success-rate estimate and empirical output mixture given success.

    Deterministic in ``seed``; independent of ``threads``.
    """
    m, det, eta_O = _validate(policy, policy.m if m is None else m, det, eta_O)
    if int(n_trials) != n_trials or n_trials < 1:
        raise DomainError(f"n_trials must be a positive integer, got {n_trials!r}")
    seed = check_seed(seed)
    width = stream_width(policy.depth)

    def work(start: int, count: int):
        success, photons, _, _ = simulate_batch(policy, m, det, eta_O, trial_uniforms(seed, start, count, width))
        return np.bincount(photons[success], minlength=m + 1)

    counts = np.sum(run_chunked(work, int(n_trials), threads), axis=0)
    hits = int(counts.sum())
    _, output = PhotonNumberMixture.from_weights(counts)
    return MonteCarloResult(Estimate.from_counts(hits, int(n_trials), seed), output, tuple(int(c) for c in counts))


def trajectories(
    policy: Policy,
    m: int,
    det: DetectorModel | None,
    eta_O: float,
    n_trials: int,
    seed: int,
    start: int = 0,
) -> Iterator[TrajectoryRecord]:
    m, det, eta_O = _validate(policy, m, det, eta_O)
    u = trial_uniforms(check_seed(seed), start, n_trials, stream_width(policy.depth))
    success, photons, outcomes, used = simulate_batch(policy, m, det, eta_O, u)
    for i in range(n_trials):
        reached = outcomes[i] >= 0
        yield TrajectoryRecord(
            tuple(int(o) for o in outcomes[i][reached]),
            bool(success[i]),
            int(photons[i]),
            tuple(float(t) for t in used[i][~np.isnan(used[i])]),
        )


def dump_trajectories(fp: IO[str], records: Iterator[TrajectoryRecord]) -> int:
    n = 0
    for rec in records:
        fp.write(rec.to_json() + "\n")
        n += 1
    return n
