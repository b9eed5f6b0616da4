"""Block codes under the zero-undetected-error (erasure-only) decoder.

The decoder keeps every message whose codeword could have produced the
received block and declares an erasure unless exactly one survives.  The
compatibility test is per position (``W(y_j|c_j) > 0`` for all ``j``), which
is the same as ``W^n(y|c) > 0`` for a memoryless channel but never
underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import chain, combinations, islice, product
from typing import Sequence

import numpy as np

from .dmc import Dmc, sample_outputs
from .errors import (
    BudgetExceeded,
    ImpossibleOutput,
    IndexOutOfRange,
    LengthMismatch,
    NoValidCode,
)

ENUMERATION_BUDGET = 10**7
SEARCH_BUDGET = 10**6
# Largest compatibility table (words^2 * reachable outputs) built for search.
_TABLE_LIMIT = 5 * 10**7


class _Erasure:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Erasure"

    def __reduce__(self):
        return (_Erasure, ())


ERASURE = _Erasure()


@dataclass(frozen=True)
class Codebook:
    n: int
    codewords: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cws = tuple(tuple(int(s) for s in c) for c in self.codewords)
        object.__setattr__(self, "codewords", cws)
        if not cws:
            raise ValueError("a codebook needs at least one codeword")
        if any(len(c) != self.n for c in cws):
            raise LengthMismatch(f"every codeword must have length {self.n}")
        if len(set(cws)) != len(cws):
            raise ValueError("codewords must be distinct")

    @property
    def messages(self) -> int:
        return len(self.codewords)

    def check_channel(self, ch: Dmc) -> None:
        for c in self.codewords:
            for s in c:
                if not 0 <= s < ch.input_size:
                    raise IndexOutOfRange(f"codeword symbol {s} outside input alphabet")

    def to_json(self) -> dict:
        return {"codewords": [list(c) for c in self.codewords], "messages": self.messages, "n": self.n}


@dataclass(frozen=True)
class CodeQuality:
    lambdas: tuple[float, ...]
    max_lambda: float
    method: str = "exact"
    samples: int | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        method = (
            "exact"
            if self.method == "exact"
            else {"monte_carlo": {"samples": self.samples, "seed": self.seed}}
        )
        return {"lambda": list(self.lambdas), "max_lambda": self.max_lambda, "method": method}

    @classmethod
    def from_lambdas(cls, lambdas, **kw) -> "CodeQuality":
        lambdas = tuple(float(v) for v in lambdas)
        return cls(lambdas=lambdas, max_lambda=max(lambdas), **kw)


# -- decoding ---------------------------------------------------------------

def _check_length(code: Codebook, y_seq) -> None:
    if len(y_seq) != code.n:
        raise LengthMismatch(f"received {len(y_seq)} symbols, blocklength is {code.n}")


def probable_messages(code: Codebook, ch: Dmc, y_seq: Sequence[int]) -> set[int]:
    """Messages whose codeword can produce ``y_seq`` with positive probability."""
    _check_length(code, y_seq)
    s = ch.support
    return {
        m
        for m, c in enumerate(code.codewords)
        if all(s[x, y] for x, y in zip(c, y_seq))
    }


def zue_decode(code: Codebook, ch: Dmc, y_seq: Sequence[int]):
    """The unique probable message, or :data:`ERASURE` if several remain."""
    probable = probable_messages(code, ch, y_seq)
    if not probable:
        raise ImpossibleOutput(f"no codeword can produce {tuple(y_seq)}")
    if len(probable) == 1:
        return next(iter(probable))
    return ERASURE


class Decoder:
    """Memoised :func:`zue_decode` for one ``(code, channel)`` pair."""

    def __init__(self, code: Codebook, ch: Dmc):
        self.code = code
        self.channel = ch
        sup = ch.support.tolist()
        self._rows = [[sup[x] for x in c] for c in code.codewords]
        self._cache: dict[tuple, object] = {}

    def __call__(self, y_seq):
        y_seq = tuple(y_seq)
        hit = self._cache.get(y_seq)
        if hit is not None:
            return hit
        _check_length(self.code, y_seq)
        found = -1
        for m, rows in enumerate(self._rows):
            if all(r[y] for r, y in zip(rows, y_seq)):
                if found >= 0:
                    found = -2
                    break
                found = m
        if found == -1:
            raise ImpossibleOutput(f"no codeword can produce {y_seq}")
        out = ERASURE if found == -2 else found
        self._cache[y_seq] = out
        return out


# -- erasure probabilities --------------------------------------------------

def _reachable(ch: Dmc, cw: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Every output block ``cw`` can produce, with its exact probability."""
    ys = np.zeros((1, 0), dtype=np.int64)
    ps = np.ones(1)
    for x in cw:
        sup = np.flatnonzero(ch.w[x] > 0)
        k = len(sup)
        ys = np.concatenate([np.repeat(ys, k, axis=0), np.tile(sup, len(ys))[:, None]], axis=1)
        ps = np.repeat(ps, k) * np.tile(ch.w[x, sup], len(ps))
    return ys, ps


def _compatible(ch: Dmc, cw: Sequence[int], ys: np.ndarray) -> np.ndarray:
    if ys.shape[1] == 0:
        return np.ones(len(ys), dtype=bool)
    return ch.support[np.asarray(cw)[None, :], ys].all(axis=1)


def erasure_prob_exact(
    code: Codebook, ch: Dmc, m: int, budget: int = ENUMERATION_BUDGET
) -> float:
    """Exact probability that the decoder erases when ``m`` is sent."""
    if ch.output_size**code.n > budget:
        raise BudgetExceeded(f"|Y|^n = {ch.output_size}^{code.n} exceeds budget {budget}")
    code.check_channel(ch)
    ys, ps = _reachable(ch, code.codewords[m])
    others = np.zeros(len(ys), dtype=bool)
    for j, c in enumerate(code.codewords):
        if j != m:
            others |= _compatible(ch, c, ys)
    return math.fsum(ps[others].tolist())


def erasure_prob_mc(
    code: Codebook, ch: Dmc, m: int, samples: int, seed: int, batch: int = 1 << 16
) -> float:
    """Fraction of ``samples`` simulated transmissions of ``m`` that are erased."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    code.check_channel(ch)
    gen = np.random.default_rng(seed)
    cw = np.asarray(code.codewords[m])
    erased = 0
    left = samples
    while left:
        size = min(batch, left)
        u = gen.random((size, code.n))
        ys = sample_outputs(ch, np.broadcast_to(cw, (size, code.n)), u)
        others = np.zeros(size, dtype=bool)
        for j, c in enumerate(code.codewords):
            if j != m:
                others |= _compatible(ch, c, ys)
        erased += int(others.sum())
        left -= size
    return erased / samples


def evaluate_code(
    code: Codebook,
    ch: Dmc,
    method: str = "auto",
    samples: int = 10**5,
    seed: int = 0,
    budget: int = ENUMERATION_BUDGET,
) -> CodeQuality:
    """Per-message erasure probabilities, exact when enumeration fits ``budget``."""
    if method == "auto":
        method = "exact" if ch.output_size**code.n <= budget else "mc"
    if method == "exact":
        lams = [erasure_prob_exact(code, ch, m, budget) for m in range(code.messages)]
        return CodeQuality.from_lambdas(lams)
    lams = [erasure_prob_mc(code, ch, m, samples, seed + m) for m in range(code.messages)]
    return CodeQuality.from_lambdas(lams, method="monte_carlo", samples=samples, seed=seed)


# -- code search ------------------------------------------------------------

class _Tables:
    """Compatibility tables over every word of ``X^n``.

    ``compat[a, b, r]`` says whether word ``b`` can produce the ``r``-th
    output reachable from word ``a``; ``prob[a, r]`` is that output's
    probability under ``a`` (zero on padding).
    """

    def __init__(self, ch: Dmc, n: int):
        self.words = list(product(range(ch.input_size), repeat=n))
        reach = [_reachable(ch, w) for w in self.words]
        rmax = max(len(p) for _, p in reach)
        nw = len(self.words)
        if nw * nw * rmax > _TABLE_LIMIT:
            raise BudgetExceeded(f"search tables of size {nw}x{nw}x{rmax} are too large")
        self.prob = np.zeros((nw, rmax))
        self.compat = np.zeros((nw, nw, rmax), dtype=bool)
        for a, (ys, ps) in enumerate(reach):
            self.prob[a, : len(ps)] = ps
            for b, wb in enumerate(self.words):
                self.compat[a, b, : len(ps)] = _compatible(ch, wb, ys)

    def lambdas(self, codes: np.ndarray) -> np.ndarray:
        """Erasure probabilities for a batch of codes given as word indices."""
        size, m = codes.shape
        out = np.zeros((size, m))
        for i in range(m):
            mask = np.zeros((size, self.prob.shape[1]), dtype=bool)
            for j in range(m):
                if j != i:
                    mask |= self.compat[codes[:, i], codes[:, j]]
            out[:, i] = (mask * self.prob[codes[:, i]]).sum(axis=1)
        return out


def _key(values: np.ndarray) -> np.ndarray:
    # Ties differing only by summation rounding resolve to the earliest code.
    return np.round(values, 12)


def search_code(
    ch: Dmc,
    n: int,
    m_count: int,
    strategy: str = "greedy",
    budget: int = SEARCH_BUDGET,
    seed: int = 0,
) -> tuple[Codebook, CodeQuality]:
    """Find a blocklength-``n`` code with ``m_count`` codewords and small max erasure.

    ``exhaustive`` scores every set of distinct codewords (``budget`` caps the
    number of sets); ``greedy`` grows the code one codeword at a time, taking
    the lexicographically smallest codeword among ties; ``random`` keeps the
    best of ``budget`` random codes drawn with ``seed``.
    """
    if m_count < 1 or n < 1:
        raise ValueError("need n >= 1 and m_count >= 1")
    if m_count > ch.input_size**n:
        raise NoValidCode(f"only {ch.input_size**n} distinct words of length {n}")

    if strategy == "exhaustive":
        total = math.comb(ch.input_size**n, m_count)
        if total > budget:
            raise BudgetExceeded(f"{total} candidate codes exceed budget {budget}")
        tables = _Tables(ch, n)
        best = _exhaustive(tables, m_count, total)
        code = Codebook(n, [tables.words[i] for i in best])
    elif strategy == "greedy":
        tables = _Tables(ch, n)
        code = Codebook(n, [tables.words[i] for i in _greedy(tables, m_count)])
    elif strategy == "random":
        code = _random_search(ch, n, m_count, budget, seed)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    quality = evaluate_code(code, ch)
    if quality.max_lambda >= 1 - 1e-12:
        raise NoValidCode("every candidate code has a message that is always erased")
    return code, quality


def _exhaustive(tables: _Tables, m_count: int, total: int, batch: int = 1 << 15) -> tuple:
    combos = combinations(range(len(tables.words)), m_count)
    best_val, best = np.inf, None
    done = 0
    while done < total:
        size = min(batch, total - done)
        arr = np.fromiter(chain.from_iterable(islice(combos, size)), dtype=np.int64)
        arr = arr.reshape(size, m_count)
        vals = _key(tables.lambdas(arr).max(axis=1))
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = vals[i], tuple(arr[i].tolist())
        done += size
    return best


def _greedy(tables: _Tables, m_count: int) -> list[int]:
    chosen = [0]
    nw = len(tables.words)
    while len(chosen) < m_count:
        cand = np.array([i for i in range(nw) if i not in chosen], dtype=np.int64)
        codes = np.column_stack([np.broadcast_to(chosen, (len(cand), len(chosen))), cand])
        vals = _key(tables.lambdas(codes).max(axis=1))
        chosen.append(int(cand[int(np.argmin(vals))]))
    return chosen


def _random_search(ch: Dmc, n: int, m_count: int, draws: int, seed: int) -> Codebook:
    gen = np.random.default_rng(seed)
    best_val, best = math.inf, None
    for _ in range(draws):
        words: list[tuple[int, ...]] = []
        while len(words) < m_count:
            w = tuple(gen.integers(ch.input_size, size=n).tolist())
            if w not in words:
                words.append(w)
        code = Codebook(n, words)
        val = round(evaluate_code(code, ch).max_lambda, 12)
        if val < best_val:
            best_val, best = val, code
            if val == 0:
                break
    return best
