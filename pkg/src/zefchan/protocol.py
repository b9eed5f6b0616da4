"""Adaptive zero-error feedback schemes as slotted state machines.

Each round carries ``n`` forward channel uses followed by a ``gamma``-symbol
verification block.  With noiseless feedback the transmitter sends the
verification block over the forward channel; with noisy feedback the
receiver sends it back over the backward channel and a one-bit state,
carried as the first codeword bit, keeps both ends in step.

Message framing for the noisy scheme: a codebook of ``2**k`` codewords
encodes bits ``b_1 .. b_k`` with ``b_1`` the transmitter state bit and the
payload as an integer in ``range(2**(k-1))``; the codeword index is
``(b_1 << (k-1)) | payload``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

from .analysis import gamma_auto
from .codebook import ERASURE, Codebook, CodeQuality, Decoder, evaluate_code
from .dmc import Dmc, DisproverTriple, find_disprovers, pick_disprover, transmit_block
from .errors import (
    BudgetExceeded,
    InvalidDisprover,
    NonterminatingConfig,
    PhaseMismatch,
    RoundCapExceeded,
)

ROUND_CAP = 10**6


def contains_letter(seq: Sequence[int], letter: int) -> bool:
    """Whether ``letter`` occurs at least once in ``seq``."""
    return letter in seq


@dataclass(frozen=True)
class GammaSchedule:
    """``"auto"`` picks :func:`gamma_auto`; an integer fixes the block length."""

    rule: str | int = "auto"

    def __post_init__(self):
        if self.rule != "auto" and (not isinstance(self.rule, int) or self.rule < 1):
            raise ValueError(f"gamma must be 'auto' or a positive integer, got {self.rule!r}")

    def for_blocklength(self, n: int) -> int:
        return gamma_auto(n) if self.rule == "auto" else self.rule


def _as_schedule(gamma) -> GammaSchedule:
    return gamma if isinstance(gamma, GammaSchedule) else GammaSchedule(gamma)


def _check_indicator(ch: Dmc, triple: DisproverTriple) -> DisproverTriple:
    if 0 <= triple.x_c < ch.input_size and 0 <= triple.y_c < ch.output_size:
        if ch.w[triple.x_c, triple.y_c] == 0:
            raise NonterminatingConfig(
                f"W(y_c={triple.y_c}|x_c={triple.x_c}) = 0: verification can never succeed"
            )
    return triple.check(ch)


class _SessionBase:
    @property
    def gamma_n(self) -> int:
        return self.gamma.for_blocklength(self.code.n)

    @cached_property
    def quality(self) -> CodeQuality | None:
        """Exact erasure probabilities, or ``None`` when enumeration is too big."""
        try:
            return evaluate_code(self.code, self.forward, method="exact")
        except BudgetExceeded:
            return None

    def screen(self) -> None:
        """Reject configurations in which some message can never get through."""
        q = self.quality
        if q is not None:
            stuck = [m for m, lam in enumerate(q.lambdas) if lam >= 1 - 1e-12]
            if stuck:
                raise NonterminatingConfig(f"messages {stuck} are erased with probability 1")


@dataclass(frozen=True, eq=False)
class NoiselessSessionConfig(_SessionBase):
    channel: Dmc
    code: Codebook
    gamma: GammaSchedule = field(default_factory=GammaSchedule)
    disprover: DisproverTriple | None = None
    disprover_policy: str = "first"

    def __post_init__(self):
        object.__setattr__(self, "gamma", _as_schedule(self.gamma))
        self.code.check_channel(self.channel)
        d = self.disprover or pick_disprover(self.channel, self.disprover_policy)
        object.__setattr__(self, "disprover", _check_indicator(self.channel, d))
        object.__setattr__(self, "decoder", Decoder(self.code, self.channel))

    @property
    def forward(self) -> Dmc:
        return self.channel

    @property
    def p_indicator(self) -> float:
        d = self.disprover
        return float(self.channel.w[d.x_c, d.y_c])

    @property
    def mode(self) -> str:
        return "noiseless"


@dataclass(frozen=True, eq=False)
class NoisySessionConfig(_SessionBase):
    forward: Dmc
    backward: Dmc
    code: Codebook
    gamma: GammaSchedule = field(default_factory=GammaSchedule)
    backward_disprover: DisproverTriple | None = None
    disprover_policy: str = "first"

    def __post_init__(self):
        object.__setattr__(self, "gamma", _as_schedule(self.gamma))
        if not find_disprovers(self.forward):
            raise InvalidDisprover("forward channel has no disprover: zero-undetected-error capacity is 0")
        self.code.check_channel(self.forward)
        size = self.code.messages
        k = size.bit_length() - 1
        if size < 2 or size != 1 << k:
            raise ValueError(f"noisy scheme needs 2**k codewords with k >= 1, got {size}")
        object.__setattr__(self, "k", k)
        d = self.backward_disprover or pick_disprover(self.backward, self.disprover_policy)
        object.__setattr__(self, "backward_disprover", _check_indicator(self.backward, d))
        object.__setattr__(self, "decoder", Decoder(self.code, self.forward))

    @property
    def payload_bits(self) -> int:
        return self.k - 1

    @property
    def p_indicator(self) -> float:
        d = self.backward_disprover
        return float(self.backward.w[d.x_c, d.y_c])

    @property
    def mode(self) -> str:
        return "noisy"

    def codeword_index(self, state_bit: int, payload: int) -> int:
        return (state_bit << self.payload_bits) | payload

    def split_index(self, index: int) -> tuple[int, int]:
        """``(state_bit, payload)`` carried by codeword ``index``."""
        return index >> self.payload_bits, index & ((1 << self.payload_bits) - 1)


# -- transcript -------------------------------------------------------------

@dataclass
class RoundRecord:
    round_index: int
    forward_sent: tuple
    forward_received: tuple
    decode: object
    decoded_state_bit: int | None
    backward_sent: tuple
    backward_received: tuple
    tx_progressed: bool
    rx_committed: bool
    message_index: int = 0

    def to_json(self) -> dict:
        return {
            "backward_received": list(self.backward_received),
            "backward_sent": list(self.backward_sent),
            "decode": "erasure" if self.decode is ERASURE else self.decode,
            "decoded_state_bit": self.decoded_state_bit,
            "forward_received": list(self.forward_received),
            "forward_sent": list(self.forward_sent),
            "message_index": self.message_index,
            "round_index": self.round_index,
            "rx_committed": self.rx_committed,
            "tx_progressed": self.tx_progressed,
        }


# -- noiseless feedback -----------------------------------------------------

class MessageRun(NamedTuple):
    rounds: int
    committed: int
    transcript: list


def run_noiseless_message(
    cfg: NoiselessSessionConfig,
    m: int,
    rng,
    record: bool = False,
    round_cap: int = ROUND_CAP,
    message_index: int = 0,
) -> MessageRun:
    """Repeat ``c(m)`` plus a verification block until the receiver sees ``y_c``.

    The transmitter sees the forward outputs through perfect feedback and
    runs the receiver's decoder on them; it follows with ``[x_c]^gamma`` if
    that decode equals ``m`` and ``[x_e]^gamma`` otherwise.  Both ends stop
    on the first ``y_c`` in the verification block, when the receiver commits
    its decode.
    """
    ch = cfg.channel
    cw = cfg.code.codewords[m]
    d = cfg.disprover
    gamma = cfg.gamma_n
    ok_block, bad_block = (d.x_c,) * gamma, (d.x_e,) * gamma
    decode = cfg.decoder
    transcript = []
    rounds = 0
    while True:
        rounds += 1
        if rounds > round_cap:
            raise RoundCapExceeded(f"message {m} still undelivered after {round_cap} rounds")
        y = transmit_block(ch, cw, rng)
        m_hat = decode(y)
        # Perfect feedback: the transmitter's copy of the decode is the same.
        block = ok_block if m_hat == m else bad_block
        yb = transmit_block(ch, block, rng)
        done = d.y_c in yb
        if record:
            transcript.append(
                RoundRecord(
                    round_index=rounds,
                    forward_sent=cw,
                    forward_received=y,
                    decode=m_hat,
                    decoded_state_bit=None,
                    backward_sent=block,
                    backward_received=yb,
                    tx_progressed=done,
                    rx_committed=done,
                    message_index=message_index,
                )
            )
        if done:
            return MessageRun(rounds, m_hat, transcript)


# -- noisy feedback: transmitter --------------------------------------------

class TxState(NamedTuple):
    s_t: int
    pending: tuple
    round_count: int = 0
    phase: str = "forward"


class TxAction(NamedTuple):
    kind: str  # "send", "advance" or "retransmit"
    codeword: tuple | None = None
    rounds: int | None = None


def tx_step(cfg: NoisySessionConfig, st: TxState, phase_input=None) -> tuple[TxState, TxAction]:
    """One transmitter transition.

    In the forward phase ``phase_input`` must be ``None``; the action carries
    the codeword for ``(s_t, payload)``.  In the verification phase
    ``phase_input`` is the block received over the backward channel: on a
    ``y'_c`` the state bit flips and the next payload is loaded, otherwise
    the same codeword goes out again next round.
    """
    if st.phase == "forward":
        if phase_input is not None:
            raise PhaseMismatch("forward phase takes no input")
        if not st.pending:
            raise PhaseMismatch("no payload left to send")
        cw = cfg.code.codewords[cfg.codeword_index(st.s_t, st.pending[0])]
        return TxState(st.s_t, st.pending, st.round_count + 1, "verify"), TxAction("send", cw)
    if st.phase == "verify":
        if phase_input is None:
            raise PhaseMismatch("verification phase needs the backward block")
        if cfg.backward_disprover.y_c in phase_input:
            return (
                TxState(1 - st.s_t, st.pending[1:], 0, "forward"),
                TxAction("advance", rounds=st.round_count),
            )
        return TxState(st.s_t, st.pending, st.round_count, "forward"), TxAction("retransmit")
    raise PhaseMismatch(f"unknown phase {st.phase!r}")


# -- noisy feedback: receiver -----------------------------------------------

class RxState(NamedTuple):
    s_r: int
    committed: tuple = ()


class RxAction(NamedTuple):
    block: tuple
    decode: object
    state_bit: int | None
    committed: bool


def rx_step(cfg: NoisySessionConfig, st: RxState, y_seq) -> tuple[RxState, RxAction]:
    """One receiver transition on a received forward block.

    The decoder searches the whole codebook (both state-bit values).  A
    unique decode whose state bit matches ``s_r`` commits the payload and
    flips ``s_r``; any unique decode is acknowledged with ``[x'_c]^gamma``.
    An erasure is answered with ``[x'_e]^gamma``.
    """
    d = cfg.backward_disprover
    gamma = cfg.gamma_n
    idx = cfg.decoder(y_seq)
    if idx is ERASURE:
        return st, RxAction((d.x_e,) * gamma, ERASURE, None, False)
    bit, payload = cfg.split_index(idx)
    block = (d.x_c,) * gamma
    if bit == st.s_r:
        return RxState(1 - st.s_r, st.committed + (payload,)), RxAction(block, idx, bit, True)
    return st, RxAction(block, idx, bit, False)


class SessionRun(NamedTuple):
    rounds: list
    committed: tuple
    transcript: list
    tx: TxState
    rx: RxState


def run_noisy_session(
    cfg: NoisySessionConfig,
    payloads: Sequence[int],
    rng,
    state_bit: int = 0,
    record: bool = False,
    round_cap: int = ROUND_CAP,
    first_message_index: int = 0,
) -> SessionRun:
    """Drive both machines until every payload is committed and acknowledged.

    ``state_bit`` is the shared starting value of ``s_t`` and ``s_r``.
    Returns the per-message round counts; message ``i`` used
    ``(n + gamma) * rounds[i]`` channel uses.
    """
    limit = 1 << cfg.payload_bits
    if any(not 0 <= p < limit for p in payloads):
        raise ValueError(f"payloads must lie in range({limit})")
    fwd, bwd = cfg.forward, cfg.backward
    tx = TxState(state_bit, tuple(payloads))
    rx = RxState(state_bit)
    rounds = []
    transcript = []
    while tx.pending:
        tx, act = tx_step(cfg, tx)
        r = tx.round_count
        if r > round_cap:
            raise RoundCapExceeded(f"payload still unacknowledged after {round_cap} rounds")
        y = transmit_block(fwd, act.codeword, rng)
        rx, ract = rx_step(cfg, rx, y)
        yb = transmit_block(bwd, ract.block, rng)
        tx, done = tx_step(cfg, tx, yb)
        if done.kind == "advance":
            rounds.append(done.rounds)
        if record:
            transcript.append(
                RoundRecord(
                    round_index=r,
                    forward_sent=act.codeword,
                    forward_received=y,
                    decode=ract.decode,
                    decoded_state_bit=ract.state_bit,
                    backward_sent=ract.block,
                    backward_received=yb,
                    tx_progressed=done.kind == "advance",
                    rx_committed=ract.committed,
                    message_index=first_message_index + len(rounds) - (done.kind == "advance"),
                )
            )
    return SessionRun(rounds, rx.committed, transcript, tx, rx)


def expected_round_probability(cfg) -> tuple[float, ...]:
    """Per-message round success probability for a screened configuration."""
    from .analysis import round_success_prob

    q = cfg.quality
    if q is None:
        raise BudgetExceeded("exact erasure probabilities are not available")
    return tuple(round_success_prob(lam, cfg.p_indicator, cfg.gamma_n) for lam in q.lambdas)


def bits_per_message(cfg) -> float:
    return math.log2(cfg.code.messages)
