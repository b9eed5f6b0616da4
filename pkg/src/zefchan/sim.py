"""Monte Carlo harness, bounded exhaustive explorer and goodness-of-fit tests.

Random streams: message ``i`` belongs to chunk ``c = i // chunk_size`` and
chunk ``c`` draws everything (payloads first, then channel noise) from
``PCG64(SeedSequence(seed, spawn_key=(c,)))``.  Results therefore do not
depend on how many worker processes run the chunks.

Noisy sessions are simulated one message at a time.  After an
acknowledgement both state bits are equal, so message ``i`` always starts
from ``s_t = s_r = i mod 2``; running it in isolation from that state is the
same as running it inside one long session.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import stats as sps

from .analysis import Prediction, predict
from .codebook import ERASURE, _reachable
from .dmc import UniformStream
from .errors import BudgetExceeded, DegenerateSamples, ZefchanError
from .protocol import (
    ROUND_CAP,
    NoisySessionConfig,
    RoundRecord,
    RxState,
    TxState,
    run_noiseless_message,
    run_noisy_session,
    rx_step,
    tx_step,
)

CHUNK_SIZE = 1 << 14
EXPLORE_BUDGET = 10**8


def worker_count() -> int:
    """CPU count, capped by ``ZEFCHAN_THREADS`` when set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("ZEFCHAN_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


@dataclass
class SimStats:
    mode: str
    seed: int
    n: int
    gamma: int
    bits_per_message: float
    payload_bits: int
    payloads: np.ndarray
    rounds: np.ndarray
    committed_ok: np.ndarray
    transcript: list = field(default_factory=list, repr=False)

    @property
    def messages_sent(self) -> int:
        return len(self.rounds)

    @property
    def undetected_errors(self) -> int:
        return int(np.count_nonzero(~self.committed_ok))

    @property
    def delays(self) -> np.ndarray:
        return (self.n + self.gamma) * self.rounds

    @property
    def mean_rounds(self) -> float:
        return float(self.rounds.mean())

    @property
    def mean_delay(self) -> float:
        return float(self.delays.mean())

    @property
    def total_uses(self) -> int:
        return int(self.delays.sum())

    @property
    def empirical_rate(self) -> float:
        """Codebook bits (``log2|M|`` per message) per channel use."""
        return self.messages_sent * self.bits_per_message / self.total_uses

    @property
    def payload_rate(self) -> float:
        """Payload bits per channel use; excludes the state bit in the noisy scheme."""
        return self.messages_sent * self.payload_bits / self.total_uses

    @property
    def per_message(self):
        for p, r in zip(self.payloads.tolist(), self.rounds.tolist()):
            yield p, r, (self.n + self.gamma) * r

    def rounds_for(self, codeword_payload: int) -> np.ndarray:
        return self.rounds[self.payloads == codeword_payload]

    def to_json(self) -> dict:
        return {
            "bits_per_message": self.bits_per_message,
            "empirical_rate": self.empirical_rate,
            "gamma": self.gamma,
            "max_rounds": int(self.rounds.max()),
            "mean_delay": self.mean_delay,
            "mean_rounds": self.mean_rounds,
            "messages_sent": self.messages_sent,
            "mode": self.mode,
            "n": self.n,
            "payload_bits": self.payload_bits,
            "payload_rate": self.payload_rate,
            "seed": self.seed,
            "total_rounds": int(self.rounds.sum()),
            "total_uses": self.total_uses,
            "undetected_errors": self.undetected_errors,
        }

    def csv_rows(self):
        yield "msg_index,payload,rounds,delay_uses,committed_ok"
        for i, ((p, r, d), ok) in enumerate(zip(self.per_message, self.committed_ok.tolist())):
            yield f"{i},{p},{r},{d},{int(ok)}"


def _run_chunk(cfg, seed: int, chunk: int, start: int, count: int, record: bool, round_cap: int):
    gen = chunk_generator(seed, chunk)
    rng = UniformStream(gen)
    rounds = np.empty(count, dtype=np.int64)
    ok = np.empty(count, dtype=bool)
    transcript = []
    if isinstance(cfg, NoisySessionConfig):
        payloads = gen.integers(1 << cfg.payload_bits, size=count)
        for j, p in enumerate(payloads.tolist()):
            i = start + j
            run = run_noisy_session(
                cfg, (p,), rng, state_bit=i & 1, record=record,
                round_cap=round_cap, first_message_index=i,
            )
            rounds[j] = run.rounds[0]
            ok[j] = run.committed == (p,)
            transcript.extend(run.transcript)
    else:
        payloads = gen.integers(cfg.code.messages, size=count)
        for j, m in enumerate(payloads.tolist()):
            run = run_noiseless_message(
                cfg, m, rng, record=record, round_cap=round_cap, message_index=start + j
            )
            rounds[j] = run.rounds
            ok[j] = run.committed == m
            transcript.extend(run.transcript)
    return payloads, rounds, ok, transcript


def monte_carlo(
    cfg,
    num_messages: int,
    seed: int,
    record: bool = False,
    workers: int | None = None,
    round_cap: int = ROUND_CAP,
    chunk_size: int = CHUNK_SIZE,
) -> SimStats:
    """Run ``num_messages`` uniformly random messages through the configured scheme."""
    if num_messages < 1:
        raise ValueError("num_messages must be >= 1")
    cfg.screen()
    jobs = [
        (cfg, seed, c, start, min(chunk_size, num_messages - start), record, round_cap)
        for c, start in enumerate(range(0, num_messages, chunk_size))
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, *zip(*jobs)))
    else:
        results = [_run_chunk(*job) for job in jobs]

    payload_bits = cfg.payload_bits if isinstance(cfg, NoisySessionConfig) else 0
    return SimStats(
        mode=cfg.mode,
        seed=seed,
        n=cfg.code.n,
        gamma=cfg.gamma_n,
        bits_per_message=math.log2(cfg.code.messages),
        payload_bits=payload_bits,
        payloads=np.concatenate([r[0] for r in results]),
        rounds=np.concatenate([r[1] for r in results]),
        committed_ok=np.concatenate([r[2] for r in results]),
        transcript=[rec for r in results for rec in r[3]],
    )


def predict_session(cfg) -> Prediction:
    """Closed-form prediction for a session configuration (exact erasure probabilities)."""
    q = cfg.quality
    if q is None:
        raise BudgetExceeded("exact erasure probabilities are not available for this code")
    return predict(q, cfg.p_indicator, cfg.code.n, cfg.gamma_n)


# -- goodness of fit --------------------------------------------------------

class GeometricFit(tuple):
    """``(passed, statistic)`` plus ``dof`` and ``critical`` attributes."""

    def __new__(cls, passed: bool, statistic: float, dof: int, critical: float):
        self = super().__new__(cls, (passed, statistic))
        self.dof = dof
        self.critical = critical
        return self

    @property
    def passed(self) -> bool:
        return self[0]

    @property
    def statistic(self) -> float:
        return self[1]


def geometric_bins(n: int, p: float, min_expected: float = 5.0) -> list[tuple[int, int | None, float]]:
    """Bins ``(lo, hi, expected)`` over ``{1, 2, ...}`` with every expectation >= ``min_expected``.

    ``hi`` is inclusive; the last bin is the open tail ``hi = None``.
    """
    q = 1.0 - p
    bins = []
    lo, acc, k = 1, 0.0, 1
    while True:
        acc += n * p * q ** (k - 1)
        tail = n * q**k
        if acc >= min_expected and tail >= min_expected:
            bins.append((lo, k, acc))
            lo, acc = k + 1, 0.0
        elif tail < min_expected:
            break
        k += 1
    bins.append((lo, None, n * q ** (lo - 1)))
    while len(bins) > 1 and bins[-1][2] < min_expected:
        tail = bins.pop()
        prev = bins.pop()
        bins.append((prev[0], None, prev[2] + tail[2]))
    return bins


def geometric_fit(samples, p: float, alpha: float = 0.01) -> GeometricFit:
    """Chi-square goodness of fit of positive integer ``samples`` to Geometric(p).

    Tail bins are pooled until each expected count is at least 5; ``p`` is
    given, not estimated, so the test has ``bins - 1`` degrees of freedom.
    """
    x = np.asarray(samples)
    if x.size == 0:
        raise DegenerateSamples("no samples")
    if np.any(x < 1) or not np.all(x == np.round(x)):
        raise DegenerateSamples("samples must be positive integers")
    if not 0 < p <= 1 or not 0 < alpha < 1:
        raise ValueError("need p in (0, 1] and alpha in (0, 1)")
    if p == 1:
        ok = bool(np.all(x == 1))
        return GeometricFit(ok, 0.0 if ok else math.inf, 0, 0.0)
    bins = geometric_bins(x.size, p)
    if len(bins) < 2:
        raise DegenerateSamples(f"{x.size} samples are too few to test Geometric({p})")
    stat = 0.0
    for lo, hi, expected in bins:
        observed = np.count_nonzero(x >= lo) if hi is None else np.count_nonzero((x >= lo) & (x <= hi))
        stat += (observed - expected) ** 2 / expected
    dof = len(bins) - 1
    critical = float(sps.chi2.ppf(1 - alpha, dof))
    return GeometricFit(bool(stat < critical), float(stat), dof, critical)


def mean_within(samples, p: float, k_sigma: float = 3.0) -> tuple[bool, float, float]:
    """Is the sample mean within ``k_sigma`` standard errors of ``1/p``?

    Returns ``(ok, mean, standard_error)``.
    """
    x = np.asarray(samples, dtype=float)
    se = math.sqrt(1 - p) / p / math.sqrt(x.size)
    mean = float(x.mean())
    return abs(mean - 1 / p) <= k_sigma * se, mean, se


# -- exhaustive exploration -------------------------------------------------

@dataclass
class ExploreReport:
    depth: int
    executions: int
    rounds_explored: int
    violations: list
    violation_count: int
    liveness_ok: bool
    payload_sequences: int

    @property
    def safe(self) -> bool:
        return self.violation_count == 0

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "executions": self.executions,
            "liveness_bounded": True,
            "liveness_ok": self.liveness_ok,
            "payload_sequences": self.payload_sequences,
            "rounds_explored": self.rounds_explored,
            "safe": self.safe,
            "violation_count": self.violation_count,
            "violations": self.violations,
        }


class _Explorer:
    def __init__(self, cfg, tx, rx, keep):
        self.cfg = cfg
        self.tx = tx
        self.rx = rx
        self.keep = keep
        self.executions = 0
        self.rounds = 0
        self.violations = []
        self.violation_count = 0
        self.liveness_ok = True
        self._fwd = {}
        self._bwd = {}

    def outcomes(self, cache, ch, block):
        hit = cache.get(block)
        if hit is None:
            ys, _ = _reachable(ch, block)
            hit = cache[block] = [tuple(y) for y in ys.tolist()]
        return hit

    def fail(self, reason, payloads, trace):
        self.executions += 1
        self.violation_count += 1
        if len(self.violations) < self.keep:
            self.violations.append(
                {"payloads": list(payloads), "reason": reason, "transcript": [r.to_json() for r in trace]}
            )

    def run(self, payloads, tx_state, rx_state, depth, trace):
        if depth == 0 or not tx_state.pending:
            self.executions += 1
            return
        cfg = self.cfg
        y_c = cfg.backward_disprover.y_c
        sent_before = len(payloads) - len(tx_state.pending)
        c_before = len(rx_state.committed)
        try:
            tx1, act = self.tx(cfg, tx_state)
        except ZefchanError as exc:
            return self.fail(f"transmitter error: {exc}", payloads, trace)
        for y in self.outcomes(self._fwd, cfg.forward, act.codeword):
            try:
                rx1, ract = self.rx(cfg, rx_state, y)
            except ZefchanError as exc:
                self.fail(f"receiver error: {exc}", payloads, trace)
                continue
            for yb in self.outcomes(self._bwd, cfg.backward, tuple(ract.block)):
                self.rounds += 1
                try:
                    tx2, done = self.tx(cfg, tx1, yb)
                except ZefchanError as exc:
                    self.fail(f"transmitter error: {exc}", payloads, trace)
                    continue
                rec = RoundRecord(
                    round_index=tx1.round_count,
                    forward_sent=act.codeword,
                    forward_received=y,
                    decode=ract.decode,
                    decoded_state_bit=ract.state_bit,
                    backward_sent=tuple(ract.block),
                    backward_received=yb,
                    tx_progressed=done.kind == "advance",
                    rx_committed=ract.committed,
                    message_index=sent_before,
                )
                path = trace + [rec]
                reason = self.check(payloads, c_before, tx2, rx1, ract, yb, done, y_c)
                if reason:
                    self.fail(reason, payloads, path)
                    continue
                self.run(payloads, tx2, rx1, depth - 1, path)

    def check(self, payloads, c_before, tx2, rx1, ract, yb, done, y_c):
        committed = tuple(rx1.committed)
        c = len(committed)
        t = len(payloads) - len(tx2.pending)
        if c - c_before not in (0, 1):
            return f"{c - c_before} commits in one round"
        if c > len(payloads) or committed != tuple(payloads[:c]):
            return f"committed {list(committed)} is not a prefix of the payloads"
        if t > c:
            return f"transmitter advanced past message {t - 1} which was never committed"
        if c > t + 1:
            return "receiver committed more than one message ahead of the transmitter"
        if (tx2.s_t != rx1.s_r) != (c == t + 1):
            return f"state bits s_t={tx2.s_t} s_r={rx1.s_r} with {c} committed and {t} acknowledged"
        if ract.decode is not ERASURE and y_c in yb and done.kind != "advance":
            self.liveness_ok = False
            return "unique decode acknowledged with y'_c but transmitter did not advance"
        return None


def explore_exhaustive(
    cfg: NoisySessionConfig,
    max_rounds: int,
    payloads=None,
    tx=tx_step,
    rx=rx_step,
    budget: int = EXPLORE_BUDGET,
    keep: int = 10,
) -> ExploreReport:
    """Enumerate every positive-probability channel realisation up to ``max_rounds``.

    ``payloads`` is a list of payload sequences to try; by default every
    sequence of length ``max_rounds``.  Each round checks zero error,
    exactly-once in-order delivery, state-bit agreement and acknowledgement
    progress.  ``tx`` and ``rx`` replace the machines (for mutation tests).
    """
    n, gamma = cfg.code.n, cfg.gamma_n
    branching = cfg.forward.output_size**n * cfg.backward.output_size**gamma
    if payloads is None:
        payloads = [tuple(p) for p in product(range(1 << cfg.payload_bits), repeat=max_rounds)]
    size = branching**max_rounds * len(payloads)
    if size > budget:
        raise BudgetExceeded(f"{size} branches exceed exploration budget {budget}")
    ex = _Explorer(cfg, tx, rx, keep)
    for seq in payloads:
        ex.run(tuple(seq), TxState(0, tuple(seq)), RxState(0), max_rounds, [])
    return ExploreReport(
        depth=max_rounds,
        executions=ex.executions,
        rounds_explored=ex.rounds,
        violations=ex.violations,
        violation_count=ex.violation_count,
        liveness_ok=ex.liveness_ok,
        payload_sequences=len(payloads),
    )


# -- prediction vs simulation -----------------------------------------------

def comparison_rows(stats: dict, prediction: dict, rel_tol: float = 0.02) -> list[dict]:
    """Predicted vs empirical rows for ``mean_rounds``, ``rate``, ``delay`` and errors."""
    rows = []
    pairs = [
        ("mean_rounds", prediction["mean_rounds"], stats["mean_rounds"]),
        ("rate", prediction["r_bar"], stats["empirical_rate"]),
        ("delay", prediction["n_bar"], stats["mean_delay"]),
    ]
    for name, pred, emp in pairs:
        delta = emp - pred
        rows.append(
            {"quantity": name, "predicted": pred, "empirical": emp, "delta": delta,
             "pass": abs(delta) <= rel_tol * abs(pred)}
        )
    errs = stats["undetected_errors"]
    rows.append({"quantity": "undetected_errors", "predicted": 0, "empirical": errs,
                 "delta": errs, "pass": errs == 0})
    return rows
