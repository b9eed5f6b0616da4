"""Closed-form round, rate and delay predictions for the feedback schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .codebook import CodeQuality
from .errors import DegenerateConfig


def gamma_auto(n: int) -> int:
    """Default verification length ``max(1, ceil(log2 n))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return max(1, (n - 1).bit_length())


def round_success_prob(lambda_m: float, p_indicator: float, gamma: int) -> float:
    """Probability that one round decodes uniquely and its acknowledgement lands.

    ``(1 - lambda_m) * (1 - (1 - p_indicator) ** gamma)``
    """
    if not 0 <= lambda_m < 1:
        raise DegenerateConfig(f"lambda_m = {lambda_m} leaves no chance of success")
    if not 0 < p_indicator <= 1:
        raise DegenerateConfig(f"indicator probability {p_indicator} must be in (0, 1]")
    if gamma < 1:
        raise DegenerateConfig("gamma must be >= 1")
    return (1 - lambda_m) * (1 - (1 - p_indicator) ** gamma)


@dataclass(frozen=True)
class Prediction:
    p: tuple[float, ...]
    expected_rounds: tuple[float, ...]
    n_bar: float
    r_bar: float
    d_bar: float | None
    n: int
    gamma: int

    @property
    def mean_rounds(self) -> float:
        """Expected rounds per message under the uniform message prior."""
        return math.fsum(self.expected_rounds) / len(self.expected_rounds)

    def to_json(self) -> dict:
        return {
            "d_bar": self.d_bar,
            "expected_rounds": list(self.expected_rounds),
            "gamma": self.gamma,
            "mean_rounds": self.mean_rounds,
            "n": self.n,
            "n_bar": self.n_bar,
            "p": list(self.p),
            "r_bar": self.r_bar,
        }


def predict(code_quality: CodeQuality, p_indicator: float, n: int, gamma: int) -> Prediction:
    """Expected delay ``(n + gamma)/|M| * sum_m 1/p_m`` and the derived rate.

    Messages are uniform over the codebook; rates are in bits per channel use.
    """
    p = tuple(round_success_prob(lam, p_indicator, gamma) for lam in code_quality.lambdas)
    rounds = tuple(1 / v for v in p)
    size = len(p)
    n_bar = (n + gamma) * math.fsum(rounds) / size
    bits = math.log2(size)
    return Prediction(
        p=p,
        expected_rounds=rounds,
        n_bar=n_bar,
        r_bar=bits / n_bar,
        d_bar=n_bar / bits if bits > 0 else None,
        n=n,
        gamma=gamma,
    )
