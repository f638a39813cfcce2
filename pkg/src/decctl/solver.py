"""Per-frame planning: which CTUs lose deblocking and how hard MC is simplified.

The frame target is first met by disabling deblocking on the least salient
CTUs (sorted-threshold rule). When deblocking alone cannot reach the target,
every CTU loses deblocking and the remainder is covered by an MC mix
``(n1, n2, n3)`` chosen by a small integer program. The mix depends only on
``N`` and the integer budget, so it can be tabulated once per resolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .core_types import (DF_ONLY, DF_PLUS_MC, ControlPlan, ModelParams, QpBucket,
                         SaliencyMap, ValidationError)
from .io import atomic_write_text

# Absolute slack for comparing targets against capacities (fractions of a frame).
TARGET_TOL = 1e-12
EXHAUSTIVE_MAX_N = 64


class InfeasibleTargetError(ValueError):
    """The requested reduction exceeds what the chosen branch can deliver."""

    def __init__(self, message: str, achievable: float):
        super().__init__(message)
        self.achievable = achievable


class MixTriple(NamedTuple):
    n1: int
    n2: int
    n3: int

    @property
    def budget(self) -> int:
        return self.n1 + 2 * self.n2 + 3 * self.n3


@dataclass
class SolveDiagnostics:
    branch: str
    threshold_index: int = 0
    budget: int = 0
    nodes: int = 0
    predicted: float = 0.0
    residual_target: Optional[float] = None
    intra_capped: bool = False
    requested_target: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "I": self.threshold_index,
            "B": self.budget,
            "nodes": self.nodes,
            "predicted": self.predicted,
            "residual_target": self.residual_target,
            "intra_capped": self.intra_capped,
        }


def solve_df_threshold(saliency: SaliencyMap, target: float, bucket: QpBucket | int,
                       params: ModelParams) -> tuple[tuple[int, ...], SolveDiagnostics]:
    """Disable deblocking on the ``I`` least salient CTUs, ``I`` minimal.

    Ties in saliency go to the lower CTU index first.
    """
    w = saliency.as_array()
    n = w.size
    k = params.coeffs(bucket)
    gains = k.a * w + k.b
    capacity = float(gains.sum() / n)
    if target < 0:
        raise ValidationError(f"negative target {target}")
    if target > capacity + TARGET_TOL:
        raise InfeasibleTargetError(
            f"target {target:.6f} exceeds deblocking capacity {capacity:.6f}", capacity)

    order = np.argsort(w, kind="stable")
    if target <= 0:
        count = 0
    else:
        cumulative = np.cumsum(gains[order]) / n
        count = min(int(np.searchsorted(cumulative, target, side="left")) + 1, n)
    f = np.zeros(n, dtype=np.int64)
    f[order[:count]] = 1
    predicted = float(gains[order[:count]].sum() / n)
    diag = SolveDiagnostics(DF_ONLY, threshold_index=count, predicted=predicted)
    return tuple(f.tolist()), diag


def mix_objective(triple: MixTriple, alpha: float, beta: float) -> float:
    """Proxy loss of an MC mix when sorted saliency grows linearly with rank."""
    n1, n2, n3 = triple
    s3 = n3
    s2 = n2 + n3
    s1 = n1 + n2 + n3
    return s3 * s3 + alpha * (s2 * s2 - s3 * s3) + beta * (s1 * s1 - s2 * s2)


def _check_budget(N: int, B: int) -> None:
    if N < 1:
        raise ValidationError(f"N must be positive, got {N}")
    if B < 0 or B > 3 * N:
        raise InfeasibleTargetError(f"budget {B} outside [0, {3 * N}] for N={N}", 3 * N)


def solve_mix_exhaustive(N: int, B: int, params: ModelParams) -> tuple[MixTriple, float]:
    """Brute-force minimizer of the mix objective; ties -> smaller n3, n2, n1."""
    _check_budget(N, B)
    if N > EXHAUSTIVE_MAX_N:
        raise ValidationError(f"exhaustive mix search limited to N <= {EXHAUSTIVE_MAX_N}")
    alpha, beta = params.alpha, params.beta
    best_key = None
    best: Optional[MixTriple] = None
    for n3 in range(N + 1):
        for n2 in range(N - n3 + 1):
            for n1 in range(N - n3 - n2 + 1):
                if n1 + 2 * n2 + 3 * n3 < B:
                    continue
                t = MixTriple(n1, n2, n3)
                key = (mix_objective(t, alpha, beta), n3, n2, n1)
                if best_key is None or key < best_key:
                    best_key, best = key, t
    assert best is not None and best_key is not None
    return best, best_key[0]


def _n2_range(N: int, B: int, n3: int) -> tuple[int, int]:
    """Feasible n2 for fixed n3 when n1 takes its smallest feasible value."""
    rest = B - 3 * n3
    return max(0, rest + n3 - N), N - n3


def _leaf_value(n3: float, n2: float, rest: float, c3: float, c2: float, c1: float) -> float:
    s1 = n3 + max(n2, rest - n2)
    return c3 * n3 * n3 + c2 * (n2 + n3) ** 2 + c1 * s1 * s1


def _relaxed_n2(n3: int, lo: int, hi: int, rest: int, c3: float, c2: float,
                c1: float) -> tuple[float, float]:
    """Continuous minimizer and minimum of the (convex) leaf value over n2 in [lo, hi]."""
    candidates = [float(lo), float(hi)]
    half = rest / 2.0
    if c1 + c2 > 0:
        x = (c1 * (n3 + rest) - c2 * n3) / (c1 + c2)
        candidates.append(min(max(x, lo), min(hi, half)) if lo <= half else float(lo))
    if lo <= half <= hi:
        candidates.append(half)
    best_x = min(candidates, key=lambda x: (_leaf_value(n3, x, rest, c3, c2, c1), x))
    return best_x, _leaf_value(n3, best_x, rest, c3, c2, c1)


def solve_mix_bnb(N: int, B: int, params: ModelParams) -> tuple[MixTriple, float, SolveDiagnostics]:
    """Branch-and-bound over n3 then n2, with continuous relaxation bounds.

    With ``s3=n3, s2=n2+n3, s1=n1+n2+n3`` the objective is
    ``(1-alpha) s3^2 + (alpha-beta) s2^2 + beta s1^2``. For a fixed ``(n3, n2)``
    the smallest feasible ``n1`` is optimal when ``beta >= 0`` (the largest
    one otherwise), and the resulting value is convex
    in ``(n3, n2)`` whenever ``0 <= beta <= alpha <= 1``; otherwise bounds are
    disabled and the search degrades to plain enumeration.
    """
    _check_budget(N, B)
    alpha, beta = params.alpha, params.beta
    c3, c2, c1 = 1.0 - alpha, alpha - beta, beta
    convex = min(c3, c2, c1) >= 0

    if B <= N:
        seed = MixTriple(B, 0, 0)
    elif B <= 2 * N:
        seed = MixTriple(2 * N - B, B - N, 0)
    else:
        seed = MixTriple(0, 3 * N - B, B - 2 * N)
    best_key = (mix_objective(seed, alpha, beta), seed.n3, seed.n2, seed.n1)
    nodes = 0

    def slack(j: float) -> float:
        return j + 1e-9 * max(1.0, abs(j))

    prev_bound = math.inf
    top = min(N, -(-B // 3)) if convex else N
    for n3 in range(max(0, B - 2 * N), top + 1):
        nodes += 1
        lo, hi = _n2_range(N, B, n3)
        if lo > hi:
            continue
        rest = B - 3 * n3
        if convex:
            x, bound = _relaxed_n2(n3, lo, hi, rest, c3, c2, c1)
            if bound > slack(best_key[0]):
                if bound > prev_bound:
                    break  # convex in n3: bounds only grow from here
                prev_bound = bound
                continue
            prev_bound = bound
            start = min(max(int(math.floor(x)), lo), hi)
            order = _outward(start, lo, hi)
        else:
            order = ((n2, 0) for n2 in range(lo, hi + 1))
        stopped = set()
        for n2, direction in order:
            if direction in stopped:
                continue
            nodes += 1
            # the objective moves with n1 as beta * s1^2, so beta < 0 wants every spare CTU
            n1 = max(0, rest - 2 * n2) if beta >= 0 else N - n2 - n3
            t = MixTriple(n1, n2, n3)
            j = mix_objective(t, alpha, beta)
            key = (j, n3, n2, n1)
            if key < best_key:
                best_key = key
            elif convex and direction and j > slack(best_key[0]):
                stopped.add(direction)
                if len(stopped) == 2:
                    break
    j, n3, n2, n1 = best_key
    triple = MixTriple(n1, n2, n3)
    diag = SolveDiagnostics(DF_PLUS_MC, budget=B, nodes=nodes)
    return triple, j, diag


def _outward(start: int, lo: int, hi: int):
    """Yield (n2, direction) visiting start, start+1, start-1, start+2, ..."""
    yield start, 0
    up, down = start + 1, start - 1
    while up <= hi or down >= lo:
        if up <= hi:
            yield up, 1
            up += 1
        if down >= lo:
            yield down, -1
            down -= 1


def solve_mix_sorted(sorted_w: np.ndarray, B: int, params: ModelParams) -> tuple[MixTriple, float]:
    """Exact mix on the actual ascending-sorted saliency (no uniformity assumption)."""
    N = sorted_w.size
    _check_budget(N, B)
    alpha, beta = params.alpha, params.beta
    prefix = np.concatenate(([0.0], np.cumsum(sorted_w)))
    n3 = np.arange(N + 1)[:, None]
    n2 = np.arange(N + 1)[None, :]
    n1 = np.maximum(0, B - 3 * n3 - 2 * n2)
    s3, s2, s1 = n3, n2 + n3, n1 + n2 + n3
    ok = s1 <= N
    s2c = np.minimum(s2, N)
    s1c = np.minimum(s1, N)
    cost = prefix[s3] + alpha * (prefix[s2c] - prefix[s3]) + beta * (prefix[s1c] - prefix[s2c])
    cost = np.where(ok, cost, np.inf)
    flat = int(np.argmin(cost))
    i3, i2 = divmod(flat, N + 1)
    triple = MixTriple(int(n1[i3, i2]), int(i2), int(i3))
    return triple, float(cost[i3, i2])


@dataclass(frozen=True)
class MixTable:
    N: int
    alpha: float
    beta: float
    entries: tuple[MixTriple, ...]
    objectives: tuple[float, ...]

    def lookup(self, B: int) -> MixTriple:
        return self.entries[B]

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "beta": self.beta,
                "entries": [list(t) for t in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "MixTable":
        try:
            N = int(data["N"])
            alpha, beta = float(data["alpha"]), float(data["beta"])
            entries = tuple(MixTriple(*(int(v) for v in e)) for e in data["entries"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed MixTable: {exc}") from exc
        if len(entries) != 3 * N + 1:
            raise ValidationError(f"MixTable for N={N} needs {3 * N + 1} entries, got {len(entries)}")
        objectives = tuple(mix_objective(t, alpha, beta) for t in entries)
        return cls(N, alpha, beta, entries, objectives)

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MixTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_mix_table(N: int, params: ModelParams) -> MixTable:
    entries = []
    objectives = []
    for B in range(3 * N + 1):
        t, j, _ = solve_mix_bnb(N, B, params)
        entries.append(t)
        objectives.append(j)
    return MixTable(N, params.alpha, params.beta, tuple(entries), tuple(objectives))


def plan_frame(saliency: SaliencyMap, target: float, bucket: QpBucket | int,
               params: ModelParams, table: Optional[MixTable] = None, *,
               intra: bool = False, exact_mix: bool = False) -> ControlPlan:
    """Plan one frame so that the modelled reduction reaches ``target``.

    ``intra`` frames have no MC to simplify; their target is capped at the
    deblocking capacity and the cap is recorded in the diagnostics.
    ``exact_mix`` solves the mix on the frame's real sorted saliency instead
    of the tabulated uniform-saliency approximation.
    """
    if not target >= 0:
        raise ValidationError(f"target must be nonnegative, got {target}")
    w = saliency.as_array()
    N = w.size
    k = params.coeffs(bucket)
    capacity = float((k.a * w + k.b).sum() / N)
    requested = target
    capped = False
    if intra:
        if target > capacity:
            target, capped = capacity, True
    else:
        mar = capacity + 3 * k.c
        if target > mar + TARGET_TOL:
            raise InfeasibleTargetError(
                f"target {target:.6f} exceeds maximal achievable reduction {mar:.6f}", mar)

    if target <= capacity:
        f, diag = solve_df_threshold(saliency, min(target, capacity), bucket, params)
        diag.intra_capped = capped
        diag.requested_target = requested
        return ControlPlan(f, (0,) * N, min(diag.predicted, 1.0), DF_ONLY, diag)

    residual = target - capacity
    B = min(math.ceil(N * residual / k.c), 3 * N)
    order = np.argsort(w, kind="stable")
    nodes = 0
    if exact_mix:
        triple, _ = solve_mix_sorted(w[order], B, params)
    elif table is not None and table.N == N:
        triple = table.lookup(B)
    else:
        triple, _, d = solve_mix_bnb(N, B, params)
        nodes = d.nodes
    g = np.zeros(N, dtype=np.int64)
    n1, n2, n3 = triple
    g[order[:n3]] = 3
    g[order[n3:n3 + n2]] = 2
    g[order[n3 + n2:n3 + n2 + n1]] = 1
    predicted = capacity + k.c * triple.budget / N
    diag = SolveDiagnostics(DF_PLUS_MC, threshold_index=N, budget=B, nodes=nodes,
                            predicted=predicted, residual_target=residual,
                            requested_target=requested)
    return ControlPlan((1,) * N, tuple(g.tolist()), min(predicted, 1.0), DF_PLUS_MC, diag)
