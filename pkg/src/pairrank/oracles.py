"""Preference answer sources: synthetic tournaments, planted-noise models,
file-backed tournaments, and the counting/caching oracle wrapper."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol

import numpy as np

from .core import Permutation, QueryLedger, make_rng

MAX_DENSE_N = 20000  # memory guard for dense storage


class PreferenceOracle(Protocol):
    """Answers W(u, v) in {0, 1} with W(u, v) + W(v, u) = 1.

    Answers must be stable within a session: the same pair always yields the
    same value.  Implementations may block while an answer is produced (a
    human labeler); callers must tolerate arbitrary latency.
    """

    n: int

    def value(self, u: int, v: int) -> int: ...


class Tournament:
    """Dense antisymmetric 0/1 preference matrix over n elements."""

    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits, dtype=np.int8)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ValueError("bits must be a square matrix")
        n = bits.shape[0]
        if n > MAX_DENSE_N:
            raise ValueError(f"dense tournament capped at n <= {MAX_DENSE_N}")
        off = ~np.eye(n, dtype=bool)
        if not np.array_equal((bits + bits.T)[off], np.ones((n, n), dtype=np.int8)[off]):
            raise ValueError("antisymmetry violated: need W(u,v) + W(v,u) = 1")
        self.bits = bits
        self.n = n

    def value(self, u: int, v: int) -> int:
        if u == v:
            raise ValueError("W is undefined on the diagonal")
        return int(self.bits[u, v])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Tournament) and np.array_equal(self.bits, other.bits)

    @classmethod
    def from_order(cls, order: Permutation | list[int]) -> "Tournament":
        """Transitive tournament consistent with the given order."""
        if not isinstance(order, Permutation):
            order = Permutation(order)
        n = len(order)
        bits = np.zeros((n, n), dtype=np.int8)
        for u in order.order:
            for v in order.order:
                if u != v and order.precedes(u, v):
                    bits[u, v] = 1
        return cls(bits)


def make_planted(n: int, p: float, seed: int) -> tuple[Tournament, Permutation]:
    """Tournament agreeing with a hidden random order on each pair
    independently with probability 1 - p.

    Returns the tournament and the planted order.  Expected cost of the
    planted order is p * (n choose 2).
    """
    if not 0 <= p < 0.5:
        raise ValueError("flip probability must lie in [0, 0.5)")
    rng = make_rng(seed)
    order = np.arange(n)
    rng.shuffle(order)
    sigma = Permutation(order)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    uu, vv = np.triu_indices(n, 1)
    preferred = (rank[uu] < rank[vv]).astype(np.int8)
    flips = (rng.random(len(uu)) < p).astype(np.int8)
    w = preferred ^ flips
    bits = np.zeros((n, n), dtype=np.int8)
    bits[uu, vv] = w
    bits[vv, uu] = 1 - w
    return Tournament(bits), sigma


class CountedOracle:
    """Wraps an oracle with a ledger: one charge per distinct unordered pair,
    cached answers, per-phase attribution."""

    def __init__(self, oracle: PreferenceOracle, ledger: QueryLedger, phase: str = "default"):
        self.oracle = oracle
        self.ledger = ledger
        self.phase = phase
        self.n = oracle.n

    def set_phase(self, phase: str) -> None:
        self.phase = phase

    def value(self, u: int, v: int) -> int:
        if u == v:
            raise ValueError("cannot query a self-pair")
        cached = self.ledger.lookup(u, v)
        if cached is not None:
            return cached
        answer = self.oracle.value(u, v)
        self.ledger.charge(u, v, answer, self.phase)
        return answer


def counted_query(oracle: PreferenceOracle, u: int, v: int, ledger: QueryLedger, phase: str) -> int:
    """One-shot form of :class:`CountedOracle`."""
    return CountedOracle(oracle, ledger, phase).value(u, v)


def store_tournament(path: str | Path, t: Tournament) -> None:
    """Text format: header ``n=<int>``, then one ``u v w`` line per pair u < v."""
    lines = [f"n={t.n}"]
    for u in range(t.n):
        for v in range(u + 1, t.n):
            lines.append(f"{u} {v} {t.value(u, v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_tournament(path: str | Path) -> Tournament:
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("missing n= header")
    n = int(lines[0][2:])
    bits = np.full((n, n), -1, dtype=np.int8)
    np.fill_diagonal(bits, 0)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed row: {ln!r}")
        u, v, w = int(parts[0]), int(parts[1]), int(parts[2])
        if not (0 <= u < n and 0 <= v < n) or u == v or w not in (0, 1):
            raise ValueError(f"invalid row: {ln!r}")
        if bits[u, v] not in (-1, w) or bits[v, u] not in (-1, 1 - w):
            raise ValueError(f"antisymmetry violation at pair ({u}, {v})")
        bits[u, v] = w
        bits[v, u] = 1 - w
    if np.any(bits == -1):
        raise ValueError("incomplete tournament file")
    return Tournament(bits)


def store_tournament_json(path: str | Path, t: Tournament) -> None:
    rows = [[u, v, t.value(u, v)] for u in range(t.n) for v in range(u + 1, t.n)]
    Path(path).write_text(json.dumps({"n": t.n, "pairs": rows}))


def load_tournament_json(path: str | Path) -> Tournament:
    data = json.loads(Path(path).read_text())
    n = int(data["n"])
    bits = np.full((n, n), -1, dtype=np.int8)
    np.fill_diagonal(bits, 0)
    for u, v, w in data["pairs"]:
        if bits[u, v] not in (-1, w):
            raise ValueError(f"antisymmetry violation at pair ({u}, {v})")
        bits[u, v] = w
        bits[v, u] = 1 - w
    if np.any(bits == -1):
        raise ValueError("incomplete tournament file")
    return Tournament(bits)
