"""Discrete memoryless channels: validation, sampling and structural analysis.

Probabilities are binary64 floats, but an entry equal to ``0`` is an exact
structural zero.  Every sign test in this module is a strict ``> 0``; only
the row-sum check uses a tolerance.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from itertools import accumulate
from typing import Sequence

import numpy as np

from .errors import (
    EmptyTable,
    IndexOutOfRange,
    InvalidDisprover,
    InvalidDistribution,
    NegativeEntry,
    NonStochasticRow,
)

ROW_SUM_TOL = 1e-12
SUPPORT_EPS = 1e-9
TOL_DECOMP = 1e-9


class Dmc:
    """Immutable row-stochastic transition table ``w[x, y] = W(y|x)``."""

    __slots__ = ("w", "name", "output_labels", "_cum", "_last", "_support")

    def __init__(self, w, name: str = "", output_labels: Sequence[str] | None = None):
        w = np.array(w, dtype=float)
        w.setflags(write=False)
        self.w = w
        self.name = name
        self.output_labels = tuple(output_labels) if output_labels is not None else None
        # Inverse-CDF tables for the scalar sampler.  Zero-width intervals can
        # never be selected by bisect_right, which is what keeps sampling sound.
        self._cum = [list(accumulate(row)) for row in w.tolist()]
        self._last = [max(y for y, v in enumerate(row) if v > 0) for row in w.tolist()]
        support = w > 0
        support.setflags(write=False)
        self._support = support

    @property
    def input_size(self) -> int:
        return self.w.shape[0]

    @property
    def output_size(self) -> int:
        return self.w.shape[1]

    @property
    def support(self) -> np.ndarray:
        """Boolean matrix of structurally possible transitions."""
        return self._support

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Dmc{label} {self.input_size}x{self.output_size}>"

    def __eq__(self, other):
        return isinstance(other, Dmc) and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash(self.w.tobytes())

    def __reduce__(self):
        return (Dmc, (self.w.tolist(), self.name, self.output_labels))


def validate_dmc(rows, name: str = "", output_labels: Sequence[str] | None = None) -> Dmc:
    """Check a table of transition probabilities and wrap it as a :class:`Dmc`."""
    rows = [list(r) for r in rows]
    if not rows or not rows[0]:
        raise EmptyTable("channel table must be at least 1x1")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise EmptyTable(f"row {i} has {len(r)} entries, expected {width}")
    w = np.array(rows, dtype=float)
    if not np.all(np.isfinite(w)):
        raise NegativeEntry("entries must be finite")
    if np.any(w < 0):
        i, j = map(int, np.argwhere(w < 0)[0])
        raise NegativeEntry(f"w[{i}][{j}] = {w[i, j]} is negative")
    if np.any(w > 1):
        i, j = map(int, np.argwhere(w > 1)[0])
        raise NonStochasticRow(f"w[{i}][{j}] = {w[i, j]} exceeds 1")
    for i, row in enumerate(rows):
        total = math.fsum(row)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise NonStochasticRow(f"row {i} sums to {total!r}")
    if output_labels is not None and len(output_labels) != width:
        raise EmptyTable("output_labels length does not match the output alphabet")
    return Dmc(w, name=name, output_labels=output_labels)


# -- standard channels ------------------------------------------------------

def identity_channel(size: int = 2) -> Dmc:
    return Dmc(np.eye(size), name=f"identity{size}")


def bsc(p: float) -> Dmc:
    return validate_dmc([[1 - p, p], [p, 1 - p]], name=f"BSC({p})")


def bec(eps: float) -> Dmc:
    """Binary erasure channel with outputs ordered ``(0, e, 1)``."""
    return validate_dmc(
        [[1 - eps, eps, 0.0], [0.0, eps, 1 - eps]],
        name=f"BEC({eps})",
        output_labels=("0", "e", "1"),
    )


def z_channel(p: float) -> Dmc:
    """Input 0 always yields 0; input 1 yields 0 with probability ``p``."""
    return validate_dmc([[1.0, 0.0], [p, 1 - p]], name=f"Z({p})")


# -- sampling ---------------------------------------------------------------

def sample_output(ch: Dmc, x: int, rng) -> int:
    """Draw one channel output for input ``x``.

    ``rng`` is anything with a ``random()`` method returning a float in
    ``[0, 1)``: :class:`random.Random`, :class:`numpy.random.Generator` or
    :class:`UniformStream`.
    """
    if not 0 <= x < ch.input_size:
        raise IndexOutOfRange(f"input {x} outside alphabet of size {ch.input_size}")
    u = rng.random()
    y = bisect_right(ch._cum[x], u)
    # Rounding can leave the last cumulative value a hair below 1.
    return y if y <= ch._last[x] else ch._last[x]


def transmit_block(ch: Dmc, x_seq: Sequence[int], rng) -> tuple[int, ...]:
    """Send ``x_seq`` through ``n`` independent uses of ``ch``."""
    n_in = ch.input_size
    cum, last = ch._cum, ch._last
    out = []
    for x in x_seq:
        if not 0 <= x < n_in:
            raise IndexOutOfRange(f"input {x} outside alphabet of size {n_in}")
        y = bisect_right(cum[x], rng.random())
        out.append(y if y <= last[x] else last[x])
    return tuple(out)


def sample_outputs(ch: Dmc, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised inverse-CDF sampler: ``u`` holds uniforms shaped like ``x``."""
    x = np.asarray(x)
    if x.size and (x.min() < 0 or x.max() >= ch.input_size):
        raise IndexOutOfRange("input symbol outside alphabet")
    cum = np.cumsum(ch.w, axis=1)
    # Count cumulative bounds <= u: same rule as bisect_right.
    y = (cum[x] <= u[..., None]).sum(axis=-1)
    last = np.asarray(ch._last)[x]
    return np.minimum(y, last)


class UniformStream:
    """Buffered scalar uniforms drawn from a numpy ``Generator``.

    Scalar ``Generator.random()`` calls are slow; this refills a block at a
    time and hands the values out one by one.
    """

    __slots__ = ("_gen", "_buf", "_i", "_block")

    def __init__(self, gen: np.random.Generator, block: int = 1 << 14):
        self._gen = gen
        self._block = block
        self._buf: list[float] = []
        self._i = 0

    def random(self) -> float:
        i = self._i
        if i >= len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            i = 0
        self._i = i + 1
        return self._buf[i]


# -- structure --------------------------------------------------------------

@dataclass(frozen=True, order=True)
class DisproverTriple:
    """``(x_c, x_e, y_c)`` with ``W(y_c|x_e) == 0`` and ``W(y_c|x_c) > 0``."""

    x_c: int
    x_e: int
    y_c: int

    def check(self, ch: Dmc) -> "DisproverTriple":
        ok = (
            0 <= self.x_c < ch.input_size
            and 0 <= self.x_e < ch.input_size
            and 0 <= self.y_c < ch.output_size
            and self.x_c != self.x_e
            and ch.w[self.x_e, self.y_c] == 0
            and ch.w[self.x_c, self.y_c] > 0
        )
        if not ok:
            raise InvalidDisprover(f"{self} is not a disprover of {ch!r}")
        return self


def find_disprovers(ch: Dmc) -> list[DisproverTriple]:
    """All disprover triples, ordered by ``(y_c, x_c, x_e)``."""
    w = ch.w
    out = []
    for y in range(ch.output_size):
        col = w[:, y]
        reach = [x for x in range(ch.input_size) if col[x] > 0]
        miss = [x for x in range(ch.input_size) if col[x] == 0]
        for xc in reach:
            for xe in miss:
                out.append(DisproverTriple(xc, xe, y))
    return out


def pick_disprover(ch: Dmc, policy: str = "first") -> DisproverTriple:
    """Choose the triple a protocol will use.

    ``"first"`` takes the lexicographically first triple; ``"max_prob"``
    takes the one with the largest ``W(y_c|x_c)`` (first among ties).
    """
    triples = find_disprovers(ch)
    if not triples:
        raise InvalidDisprover(f"{ch!r} has no disprover")
    if policy == "first":
        return triples[0]
    if policy == "max_prob":
        best = max(ch.w[t.x_c, t.y_c] for t in triples)
        return next(t for t in triples if ch.w[t.x_c, t.y_c] == best)
    raise ValueError(f"unknown disprover policy {policy!r}")


def has_nonconfusable_pair(ch: Dmc) -> bool:
    """True iff two inputs share no reachable output (zero-error capacity > 0)."""
    s = ch.support.astype(np.int64)
    overlap = s @ s.T
    np.fill_diagonal(overlap, 1)
    return bool((overlap == 0).any())


@dataclass(frozen=True)
class Decomposition:
    """Positive factors with ``w[x, y] == a[x] * b[y]`` on ``support``."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    support: frozenset

    def max_error(self, ch: Dmc) -> float:
        return max(
            (abs(ch.w[x, y] - self.a[x] * self.b[y]) for x, y in self.support),
            default=0.0,
        )


@dataclass(frozen=True)
class InconsistentCycle:
    """Closed walk on the support graph whose alternating log-sum is nonzero.

    ``edges`` lists ``(x, y)`` pairs in walk order; the log-probabilities are
    added for even positions and subtracted for odd ones.
    """

    edges: tuple[tuple[int, int], ...]
    deviation: float


@dataclass(frozen=True)
class ChannelReport:
    disprovers: list
    has_nonconfusable_pair: bool
    c0u_positive: bool
    decomposable_on_support: Decomposition | None
    witness_cycle: InconsistentCycle | None = None


def _check_distribution(q, size: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (size,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"expected a probability vector of length {size}")
    return q


def _log_potentials(ch: Dmc, q, support_eps: float, tol_decomp: float):
    """Breadth-first assignment of ``log A`` and ``log B`` over the support graph.

    Returns ``(log_a, log_b, support, cycle)`` where ``cycle`` is ``None`` when
    every edge is consistent.
    """
    q = _check_distribution(q, ch.input_size)
    nx, ny = ch.w.shape
    logw = np.full(ch.w.shape, -np.inf)
    pos = ch.w > 0
    logw[pos] = np.log(ch.w[pos])
    support = frozenset(
        (x, y) for x in range(nx) if q[x] > support_eps for y in range(ny) if pos[x, y]
    )
    adj: list[list[int]] = [[] for _ in range(nx + ny)]
    for x, y in sorted(support):
        adj[x].append(nx + y)
        adj[nx + y].append(x)

    pot = [None] * (nx + ny)
    parent = [-1] * (nx + ny)
    worst = None
    for root in range(nx):
        if pot[root] is not None or not adj[root]:
            continue
        pot[root] = 0.0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                x, y = (u, v - nx) if u < nx else (v, u - nx)
                if pot[v] is None:
                    pot[v] = logw[x, y] - pot[u]
                    parent[v] = u
                    queue.append(v)
                else:
                    dev = abs(logw[x, y] - pot[x] - pot[nx + y])
                    if dev > tol_decomp and (worst is None or dev > worst[0]):
                        worst = (dev, x, y)

    log_a = [0.0 if pot[x] is None else pot[x] for x in range(nx)]
    log_b = [0.0 if pot[nx + y] is None else pot[nx + y] for y in range(ny)]
    cycle = None
    if worst is not None:
        cycle = _witness(parent, nx, worst[1], worst[2], logw)
    return log_a, log_b, support, cycle


def _witness(parent, nx, x, y, logw) -> InconsistentCycle:
    def chain(node):
        path = [node]
        while parent[path[-1]] != -1:
            path.append(parent[path[-1]])
        return path[::-1]

    px, py = chain(x), chain(nx + y)
    i = 0
    while i + 1 < min(len(px), len(py)) and px[i + 1] == py[i + 1]:
        i += 1
    nodes = px[i:] + py[i:][::-1]
    edges = []
    for u, v in zip(nodes, nodes[1:]):
        edges.append((u, v - nx) if u < nx else (v, u - nx))
    total = math.fsum(
        (1 if k % 2 == 0 else -1) * logw[e] for k, e in enumerate(edges)
    )
    return InconsistentCycle(tuple(edges), abs(total))


def check_decomposability(
    ch: Dmc, q, support_eps: float = SUPPORT_EPS, tol_decomp: float = TOL_DECOMP
) -> Decomposition | None:
    """Find positive ``A``, ``B`` with ``W(y|x) = A(x) B(y)`` where ``q(x) W(y|x) > 0``.

    Inputs with ``q[x] <= support_eps`` are excluded from the support.
    Returns ``None`` when some cycle of the support graph is inconsistent;
    :func:`decomposition_witness` reports that cycle.
    """
    log_a, log_b, support, cycle = _log_potentials(ch, q, support_eps, tol_decomp)
    if cycle is not None:
        return None
    return Decomposition(
        a=tuple(math.exp(v) for v in log_a),
        b=tuple(math.exp(v) for v in log_b),
        support=support,
    )


def decomposition_witness(
    ch: Dmc, q, support_eps: float = SUPPORT_EPS, tol_decomp: float = TOL_DECOMP
) -> InconsistentCycle | None:
    """The cycle that rules out a decomposition, or ``None`` if one exists."""
    return _log_potentials(ch, q, support_eps, tol_decomp)[3]


def analyze(ch: Dmc, q_star=None) -> ChannelReport:
    """Positivity indicators plus the decomposability check under ``q_star``.

    ``q_star`` defaults to the Blahut-Arimoto optimum.
    """
    if q_star is None:
        from .capacity import blahut_arimoto

        q_star = blahut_arimoto(ch).q_star
    triples = find_disprovers(ch)
    return ChannelReport(
        disprovers=triples,
        has_nonconfusable_pair=has_nonconfusable_pair(ch),
        c0u_positive=bool(triples),
        decomposable_on_support=check_decomposability(ch, q_star),
        witness_cycle=decomposition_witness(ch, q_star),
    )
