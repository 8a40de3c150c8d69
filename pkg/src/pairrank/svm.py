"""Large-margin preconditioning: pairwise hinge objectives over item feature
vectors, constraint construction from a block decomposition, within-block
constraint subsampling, a norm-ball projected-subgradient solver, and the
slack lower-bound audit against the exact optimum."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import OrderedDecomposition, Permutation
from .exact import brute_force_mfast
from .oracles import PreferenceOracle, Tournament

NORM_TOL = 1e-9


@dataclass(frozen=True)
class FeatureMap:
    """Row u is the feature vector of element u; every row in the unit ball."""

    vectors: np.ndarray  # (n, d) float64

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature matrix must be 2-d")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms > 1 + NORM_TOL):
            raise ValueError("feature vectors must lie in the unit ball")
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def scores(self, w: np.ndarray) -> np.ndarray:
        return self.vectors @ w


def make_features(sigma: Permutation, d: int, seed: int, signal: float = 0.9) -> FeatureMap:
    """Experiment plumbing: coordinate 0 carries the planted score
    -rank(u)/n, the remaining d-1 coordinates are noise; rows are scaled
    into the unit ball."""
    n = len(sigma)
    rng = np.random.default_rng(seed)
    v = np.empty((n, d))
    for u in sigma.order:
        v[u, 0] = -sigma.rank_of(u) / n
    if d > 1:
        v[:, 1:] = rng.normal(scale=(1 - signal) / math.sqrt(max(1, d - 1)), size=(n, d - 1))
    v[:, 0] *= signal
    norms = np.linalg.norm(v, axis=1)
    big = norms > 1.0
    v[big] /= norms[big, None]
    return FeatureMap(v)


@dataclass(frozen=True)
class ConstraintSet:
    """Ordered hinge constraints score(u) >= score(v) + 1 - xi, one row per
    (u, v, weight).

    kind "full": one constraint per preferred pair of the whole instance.
    kind "block": cross-block pairs (weight 1, derived from block order
    without label queries) plus every within-block preferred pair.
    kind "subsampled": cross-block pairs plus an M-sized uniform multiset of
    within-block pairs, each reweighted by (total within-block pairs) / M.
    """

    kind: str
    us: np.ndarray
    vs: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.us)


def full_constraints(t: Tournament) -> ConstraintSet:
    """Every unordered pair once, oriented by the preference matrix
    (consumes all (n choose 2) labels: verification scale only)."""
    uu, vv = np.triu_indices(t.n, 1)
    w = t.bits[uu, vv]
    us = np.where(w == 1, uu, vv)
    vs = np.where(w == 1, vv, uu)
    return ConstraintSet("full", us.astype(np.int64), vs.astype(np.int64),
                         np.ones(len(us)))


def _cross_pairs(decomposition: OrderedDecomposition) -> tuple[np.ndarray, np.ndarray]:
    us, vs = [], []
    blocks = decomposition.blocks
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            for u in blocks[i]:
                for v in blocks[j]:
                    us.append(u)
                    vs.append(v)
    return np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)


def _within_pair_list(decomposition: OrderedDecomposition) -> list[tuple[int, int]]:
    pairs = []
    for block in decomposition.blocks:
        b = sorted(block)
        for i, u in enumerate(b):
            for v in b[i + 1:]:
                pairs.append((u, v))
    return pairs


def block_constraints(decomposition: OrderedDecomposition,
                      oracle: PreferenceOracle) -> ConstraintSet:
    """Cross-block pairs in block order plus all within-block preferred
    pairs (queries every within-block pair)."""
    cu, cv = _cross_pairs(decomposition)
    wu, wv = [], []
    for u, v in _within_pair_list(decomposition):
        if oracle.value(u, v) == 1:
            wu.append(u)
            wv.append(v)
        else:
            wu.append(v)
            wv.append(u)
    us = np.concatenate([cu, np.asarray(wu, dtype=np.int64)])
    vs = np.concatenate([cv, np.asarray(wv, dtype=np.int64)])
    return ConstraintSet("block", us, vs, np.ones(len(us)))


def default_subsample_size(eps: float, c: float, d: int,
                           c_sub: float = 1.0, log_arg: str = "c_over_eps") -> int:
    """M = c_sub * eps^-6 * (1+2c)^2 * d * log-term; the log argument is
    switchable between ln(c/eps + 2) (default) and ln(1/eps + 2)."""
    if log_arg == "c_over_eps":
        logt = math.log(c / eps + 2)
    elif log_arg == "one_over_eps":
        logt = math.log(1.0 / eps + 2)
    else:
        raise ValueError(f"unknown log_arg {log_arg!r}")
    return max(1, int(math.ceil(c_sub * eps ** -6 * (1 + 2 * c) ** 2 * d * logt)))


def sample_subsampled(decomposition: OrderedDecomposition, oracle: PreferenceOracle,
                      m: int, rng: np.random.Generator) -> ConstraintSet:
    """Cross-block pairs plus an M-draw uniform multiset over within-block
    pairs, each draw oriented by one label query; at most M labels consumed.

    All blocks singletons: the within-block part is empty and the objective
    reduces to the cross-block term."""
    if m < 1:
        raise ValueError("subsample size must be >= 1")
    cu, cv = _cross_pairs(decomposition)
    within = _within_pair_list(decomposition)
    if not within:
        return ConstraintSet("subsampled", cu, cv, np.ones(len(cu)))
    idx = rng.integers(0, len(within), size=m)
    wu, wv = [], []
    for k in idx:
        u, v = within[int(k)]
        if oracle.value(u, v) == 1:
            wu.append(u)
            wv.append(v)
        else:
            wu.append(v)
            wv.append(u)
    weight = len(within) / m
    us = np.concatenate([cu, np.asarray(wu, dtype=np.int64)])
    vs = np.concatenate([cv, np.asarray(wv, dtype=np.int64)])
    weights = np.concatenate([np.ones(len(cu)), np.full(m, weight)])
    return ConstraintSet("subsampled", us, vs, weights)


def objective_value(cs: ConstraintSet, w: np.ndarray, features: FeatureMap,
                    c: float | None = None) -> float:
    """Weighted hinge total: sum of weight * max(0, 1 - score(u) + score(v))."""
    w = np.asarray(w, dtype=np.float64)
    if c is not None and np.linalg.norm(w) > c + NORM_TOL:
        raise ValueError("weight vector outside the feasible norm ball")
    if len(cs) == 0:
        return 0.0
    margins = (features.vectors[cs.us] - features.vectors[cs.vs]) @ w
    return float(np.sum(cs.weights * np.maximum(0.0, 1.0 - margins)))


def subgradient(cs: ConstraintSet, w: np.ndarray, features: FeatureMap) -> np.ndarray:
    """A subgradient of the objective at w: -(phi(u) - phi(v)) summed over
    active (slack > 0) constraints, weighted."""
    w = np.asarray(w, dtype=np.float64)
    if len(cs) == 0:
        return np.zeros(features.d)
    diffs = features.vectors[cs.us] - features.vectors[cs.vs]
    margins = diffs @ w
    active = margins < 1.0
    if not np.any(active):
        return np.zeros(features.d)
    return -(cs.weights[active, None] * diffs[active]).sum(axis=0)


@dataclass
class SolveResult:
    w: np.ndarray
    objective: float
    iterations: int
    trajectory: list[np.ndarray]  # recorded iterates (possibly empty)


def solve(cs: ConstraintSet, features: FeatureMap, c: float,
          iterations: int = 10_000, record_every: int = 0) -> SolveResult:
    """Projected subgradient descent over the ball ||w|| <= c with step
    c / sqrt(t); returns the best iterate seen.

    Deterministic (no randomness in the iteration); ``record_every`` > 0
    stores every k-th iterate for audit purposes."""
    if c <= 0:
        raise ValueError("norm bound must be positive")
    w = np.zeros(features.d)
    best_w = w.copy()
    best_f = objective_value(cs, w, features)
    trajectory: list[np.ndarray] = []
    for t in range(1, iterations + 1):
        g = subgradient(cs, w, features)
        gn = np.linalg.norm(g)
        if gn > 0:
            w = w - (c / math.sqrt(t)) / gn * g
        norm = np.linalg.norm(w)
        if norm > c:
            w = w * (c / norm)
        f = objective_value(cs, w, features)
        if f < best_f:
            best_f = f
            best_w = w.copy()
        if record_every and t % record_every == 0:
            trajectory.append(w.copy())
    return SolveResult(best_w, best_f, iterations, trajectory)


def extract_permutation(w: np.ndarray, features: FeatureMap) -> Permutation:
    """Elements by decreasing score; ties broken by ascending element id
    (the fixed arbitrary order)."""
    scores = features.scores(np.asarray(w, dtype=np.float64))
    order = sorted(range(features.n), key=lambda u: (-scores[u], u))
    return Permutation(order)


@dataclass(frozen=True)
class SlackBoundReport:
    objective: float
    exact_opt: int
    holds: bool
    cyclic_triples: int


def verify_slack_lower_bound(w: np.ndarray, features: FeatureMap,
                             t: Tournament) -> SlackBoundReport:
    """Audits that the full hinge objective at any feasible w is at least
    the exact minimal backward cost; also counts cyclic triples (each one
    forces total slack >= 1 on its three pairs)."""
    f1 = objective_value(full_constraints(t), w, features)
    _, opt = brute_force_mfast(t)
    cyc = 0
    for a in range(t.n):
        for b in range(a + 1, t.n):
            for c in range(b + 1, t.n):
                ab, bc, ca = t.value(a, b), t.value(b, c), t.value(c, a)
                if ab == bc == ca:
                    cyc += 1
    return SlackBoundReport(f1, opt, f1 >= opt - 1e-9, cyc)


def store_features(path: str | Path, features: FeatureMap) -> None:
    data = {str(u): features.vectors[u].tolist() for u in range(features.n)}
    Path(path).write_text(json.dumps(data))


def load_features(path: str | Path) -> FeatureMap:
    data = json.loads(Path(path).read_text())
    n = len(data)
    rows = [data[str(u)] for u in range(n)]
    return FeatureMap(np.asarray(rows, dtype=np.float64))


def store_model(path: str | Path, result: SolveResult, c: float, kind: str) -> None:
    Path(path).write_text(json.dumps({
        "w": result.w.tolist(), "c": c, "objective": result.objective, "kind": kind,
    }))
