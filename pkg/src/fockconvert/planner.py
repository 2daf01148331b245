"""Optimal adaptive photon-subtraction schemes for |m> -> |n> conversion.

The success probability of a k-stage scheme is built up stage by stage:
the first beam splitter reflects j photons with binomial probability and the
remaining |m-j> is handed to an optimal (k-1)-stage scheme.  The optimal
first-stage transmittance is a maximizer of that one-variable polynomial.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fock import (
    DetectorModel,
    DomainError,
    IdealPNR,
    PhotonNumberMixture,
    binomial_kernel,
    binomial_table,
    check_photons,
    check_unit,
)

ROOT_SUBINTERVALS = 256
ROOT_XTOL = 1e-12
TIE_TOL = 1e-12
MAX_TABLE_WORK = 20_000

ACTIVE = "active"
DONE = "done"
FAILED = "failed"


def stage_success(T: float, m: int, n: int, prior: Sequence[float]) -> float:
    """Success probability when the first stage has transmittance T and the
    remaining photons |m-j> succeed with probability prior[j]."""
    comb = binomial_table()
    return float(
        sum(comb[m, j] * T ** (m - j) * (1.0 - T) ** j * prior[j] for j in range(m - n + 1))
    )


def stationarity_polynomial(T: float, m: int, n: int, prior: Sequence[float]) -> float:
    """dP/dT divided by T^(n-1): a polynomial of degree m-n in T."""
    comb = binomial_table()
    total = 0.0
    for j in range(m - n + 1):
        a = m - j - n
        term = (m - j) * T**a * (1.0 - T) ** j
        if j > 0:
            term -= j * T ** (a + 1) * (1.0 - T) ** (j - 1)
        total += comb[m, j] * term * prior[j]
    return total


def _bisect(f, lo: float, hi: float, flo: float) -> float:
    while hi - lo > ROOT_XTOL:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def interior_roots(f, n_sub: int = ROOT_SUBINTERVALS) -> List[float]:
    """Real roots of f in (0, 1) located by sign changes on a uniform grid."""
    grid = np.linspace(0.0, 1.0, n_sub + 1)
    values = [f(x) for x in grid]
    roots = []
    for i in range(n_sub):
        a, b, fa, fb = grid[i], grid[i + 1], values[i], values[i + 1]
        if fa == 0.0 and 0.0 < a < 1.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(_bisect(f, float(a), float(b), fa))
    return roots


def optimal_first_stage(m: int, n: int, prior: Sequence[float]) -> Tuple[float, float]:
    """Best first-stage transmittance T_1 and the resulting success probability.

    ``prior[j]`` is the optimal success probability of converting |m-j> to |n>
    with one stage fewer, for j = 0..m-n.  Ties (within 1e-12) go to the larger
    T_1, so an all-zero prior yields (1.0, 0.0).
    """
    m, n = check_photons("m", m), check_photons("n", n)
    if m <= n:
        raise DomainError(f"need m > n, got m={m}, n={n}")
    prior = [float(p) for p in prior]
    if len(prior) != m - n + 1:
        raise DomainError(f"prior must have m-n+1={m - n + 1} entries, got {len(prior)}")
    if any(not 0.0 <= p <= 1.0 for p in prior):
        raise DomainError("prior probabilities must lie in [0, 1]")

    candidates = [0.0, 1.0]
    candidates += interior_roots(lambda t: stationarity_polynomial(t, m, n, prior))
    scored = [(stage_success(t, m, n, prior), t) for t in candidates]
    best = max(p for p, _ in scored)
    T = max(t for p, t in scored if p >= best - TIE_TOL)
    return T, stage_success(T, m, n, prior)


@dataclass
class PmaxTable:
    """Optimal success probabilities P_max(m', n | k) for n <= m' <= m, 0 <= k <= k_max."""

    m: int
    n: int
    k_max: int
    P: np.ndarray  # indexed [m' - n, k]
    T1: np.ndarray  # optimal first-stage transmittance, NaN where undefined

    def pmax(self, m: int, k: int) -> float:
        return float(self.P[m - self.n, k])

    def t1(self, m: int, k: int) -> float:
        return float(self.T1[m - self.n, k])

    def rows(self):
        for l in range(self.m - self.n + 1):
            for k in range(1, self.k_max + 1):
                yield self.n + l, self.n, k, float(self.T1[l, k]), float(self.P[l, k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["m", "n", "k", "T1_opt", "P_max"])
        for m, n, k, t, p in self.rows():
            writer.writerow([m, n, k, f"{t:.6g}", f"{p:.6g}"])
        return buf.getvalue()


def pmax_table(m: int, n: int, k_max: int, max_work: int = MAX_TABLE_WORK) -> PmaxTable:
    m, n = check_photons("m", m), check_photons("n", n)
    if m < n:
        raise DomainError(f"need m >= n, got m={m}, n={n}")
    if int(k_max) != k_max or k_max < 1:
        raise DomainError(f"k_max must be a positive integer, got {k_max!r}")
    if (m - n) * k_max > max_work:
        raise DomainError(f"(m-n)*k_max={(m - n) * k_max} exceeds the work bound {max_work}")

    L = m - n
    P = np.zeros((L + 1, k_max + 1))
    T1 = np.full((L + 1, k_max + 1), np.nan)
    P[0, :] = 1.0
    T1[0, 1:] = 1.0
    for l in range(1, L + 1):
        for k in range(1, k_max + 1):
            prior = [P[l - j, k - 1] for j in range(l + 1)]
            T1[l, k], P[l, k] = optimal_first_stage(n + l, n, prior)
    return PmaxTable(m, n, k_max, P, T1)


@dataclass
class PolicyNode:
    """One beam splitter setting; ``children`` is keyed by the detected count.

    A missing child means every later stage on that branch is transparent.
    """

    T: float
    status: str = ACTIVE
    children: Dict[int, "PolicyNode"] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"T": self.T, "status": self.status}
        if self.children:
            out["children"] = {str(k): c.to_json() for k, c in sorted(self.children.items())}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PolicyNode":
        status = data.get("status", ACTIVE)
        if status not in (ACTIVE, DONE, FAILED):
            raise DomainError(f"unknown policy status {status!r}")
        children = {int(k): cls.from_json(v) for k, v in data.get("children", {}).items()}
        return cls(check_unit("T", data.get("T", 1.0)), status, children)


PASS_THROUGH = PolicyNode(1.0, ACTIVE)


@dataclass
class Policy:
    """Adaptive subtraction scheme for |m> -> |n> with ``depth`` stages."""

    root: PolicyNode
    m: int
    n: int
    depth: int

    @property
    def target(self) -> int:
        return self.m - self.n

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "k": self.depth, "policy": self.root.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "Policy":
        p = cls(PolicyNode.from_json(data["policy"]), int(data["m"]), int(data["n"]), int(data["k"]))
        _check_depth(p.root, p.depth)
        return p

    def transmittances(self, history: Sequence[int]) -> Optional[float]:
        """Transmittance used after the given outcome history (None once failed)."""
        node = self.root
        for outcome in history:
            node = node.children.get(outcome, PASS_THROUGH)
        return None if node.status == FAILED else node.T


def _check_depth(node: PolicyNode, depth: int):
    if depth < 1:
        raise DomainError("policy depth must be at least 1")
    if node.children and depth == 1:
        raise DomainError("policy tree is deeper than its declared stage count")
    for child in node.children.values():
        _check_depth(child, depth - 1)


def _status(subtracted: int, target: int) -> str:
    if subtracted > target:
        return FAILED
    return DONE if subtracted == target else ACTIVE


def build_policy(m: int, n: int, k: int, table: PmaxTable | None = None) -> Policy:
    """Optimal feedforward policy: after j photons have been detected, the next
    stage uses the optimal first-stage transmittance of (m-j, n | stages left)."""
    m, n = check_photons("m", m), check_photons("n", n)
    if m < n:
        raise DomainError(f"need m >= n, got m={m}, n={n}")
    if table is None or table.m < m or table.n != n or table.k_max < k:
        table = pmax_table(m, n, k)
    target = m - n

    def node(subtracted: int, left: int) -> PolicyNode:
        status = _status(subtracted, target)
        if status != ACTIVE:
            return PolicyNode(1.0, status)
        photons = m - subtracted
        out = PolicyNode(table.t1(photons, left), ACTIVE)
        if left > 1:
            for j in range(photons + 1):
                out.children[j] = node(subtracted + j, left - 1)
        return out

    return Policy(node(0, k), m, n, k)


def static_policy(m: int, n: int, transmittances: Sequence[float]) -> Policy:
    """Non-adaptive scheme: stage i always uses transmittances[i]."""
    ts = [check_unit("T", t) for t in transmittances]
    target = m - n

    def node(subtracted: int, i: int) -> PolicyNode:
        out = PolicyNode(ts[i], _status(subtracted, target))
        if out.status != FAILED and i + 1 < len(ts):
            for j in range(m - subtracted + 1):
                out.children[j] = node(subtracted + j, i + 1)
        return out

    return Policy(node(0, 0), m, n, len(ts))


def switched_policy(T1: float, T2: float) -> Policy:
    """Two-stage |2> -> |1> scheme whose second splitter is switched to T=1
    once a photon has been detected at the first stage."""
    root = PolicyNode(
        check_unit("T1", T1),
        ACTIVE,
        {0: PolicyNode(check_unit("T2", T2)), 1: PolicyNode(1.0, DONE), 2: PolicyNode(1.0, FAILED)},
    )
    return Policy(root, 2, 1, 2)


@dataclass
class PolicyEvaluation:
    success: float
    failure: float
    output: PhotonNumberMixture | None

    def __iter__(self):
        yield self.success
        yield self.output


def evaluate_policy(
    policy: Policy,
    m: int | None = None,
    det: DetectorModel | None = None,
    eta_O: float = 1.0,
) -> PolicyEvaluation:
    """Exact success probability of a policy by enumerating its outcome tree.

    A run succeeds when the detected counts add up to m - n after the last
    stage.  ``eta_O`` is a loss channel on the transmitted beam in front of
    every stage after the first; it acts whatever the stage transmittance.
    """
    m = policy.m if m is None else check_photons("m", m)
    det = IdealPNR() if det is None else det
    eta_O = check_unit("eta_O", eta_O)
    target = m - policy.n
    if target < 0:
        raise DomainError(f"input |{m}> has fewer photons than the target |{policy.n}>")
    outcomes = det.outcome_matrix(m)
    n_out = outcomes.shape[1]
    loss = binomial_kernel(m, eta_O)
    acc = {"success": np.zeros(m + 1), "failure": 0.0}

    def walk(node: PolicyNode, w: np.ndarray, subtracted: int, stage: int):
        if stage > 1:
            w = w @ loss
        if node.status == FAILED:
            acc["failure"] += w.sum()
            return
        split = binomial_kernel(m, 1.0 - node.T)  # [photons, reflected]
        joint = w[:, None] * split
        for o in range(n_out):
            w_next = np.zeros(m + 1)
            for c in range(m + 1):
                if w[c] == 0.0:
                    continue
                j = np.arange(c + 1)
                np.add.at(w_next, c - j, joint[c, : c + 1] * outcomes[: c + 1, o])
            mass = w_next.sum()
            if mass == 0.0:
                continue
            s = subtracted + o
            if s > target:
                acc["failure"] += mass
            elif stage == policy.depth:
                if s == target:
                    acc["success"] += w_next
                else:
                    acc["failure"] += mass
            else:
                walk(node.children.get(o, PASS_THROUGH), w_next, s, stage + 1)

    walk(policy.root, PhotonNumberMixture.fock(m).as_array(), 0, 1)
    success, output = PhotonNumberMixture.from_weights(acc["success"])
    return PolicyEvaluation(success, float(acc["failure"]), output)
