"""Shannon capacity by Blahut-Arimoto alternating maximization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dmc import Dmc, _check_distribution
from .errors import MaxIterExceeded


@dataclass(frozen=True)
class CapacityResult:
    capacity_bits: float
    q_star: tuple[float, ...]
    iterations: int
    gap_bound: float
    converged: bool = True
    lower_history: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "capacity_bits": self.capacity_bits,
            "gap_bound": self.gap_bound,
            "iterations": self.iterations,
            "q_star": list(self.q_star),
        }


def entropy(p) -> float:
    """Entropy in bits; zero-probability terms contribute nothing."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def binary_entropy(p: float) -> float:
    return entropy([p, 1 - p])


def mutual_information(q, ch: Dmc) -> float:
    """``I(Q, W)`` in bits."""
    q = _check_distribution(q, ch.input_size)
    joint = q[:, None] * ch.w
    py = joint.sum(axis=0)
    mask = joint > 0
    ratio = np.ones_like(joint)
    ratio[mask] = ch.w[mask] / np.broadcast_to(py, joint.shape)[mask]
    return float((joint[mask] * np.log2(ratio[mask])).sum())


def _divergences(w: np.ndarray, logw: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``D(W(.|x) || qW)`` in nats for every input ``x``."""
    py = q @ w
    with np.errstate(divide="ignore"):
        logpy = np.log(py)
    terms = np.where(w > 0, w * (logw - logpy), 0.0)
    return terms.sum(axis=1)


def blahut_arimoto(ch: Dmc, tol: float = 1e-9, max_iter: int = 100_000) -> CapacityResult:
    """Capacity of ``ch`` in bits per channel use and an optimal input law.

    Iterates from the uniform input distribution until the bracket
    ``max_x D_x - log sum_x q_x exp(D_x)`` (converted to bits) is at most
    ``tol``.  The returned capacity is the bracket midpoint.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = ch.w[:, (ch.w > 0).any(axis=0)]
    with np.errstate(divide="ignore"):
        logw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0)
    nx = w.shape[0]
    q = np.full(nx, 1.0 / nx)
    lower, upper = -np.inf, np.inf
    history = []
    ln2 = np.log(2.0)

    for it in range(1, max_iter + 1):
        d = _divergences(w, logw, q)
        dmax = d.max()
        s = q * np.exp(d - dmax)
        z = s.sum()
        # Running extremes: each iterate's bounds are individually valid.
        lower = max(lower, (dmax + np.log(z)) / ln2)
        upper = min(upper, dmax / ln2)
        history.append(lower)
        if upper - lower <= tol:
            return CapacityResult(
                capacity_bits=float(max(0.0, (upper + lower) / 2)),
                q_star=tuple(q.tolist()),
                iterations=it,
                gap_bound=float(upper - lower),
                lower_history=tuple(history),
            )
        q = s / z

    result = CapacityResult(
        capacity_bits=float(max(0.0, (upper + lower) / 2)),
        q_star=tuple(q.tolist()),
        iterations=max_iter,
        gap_bound=float(upper - lower),
        converged=False,
        lower_history=tuple(history),
    )
    raise MaxIterExceeded(f"gap {upper - lower:.3g} > tol after {max_iter} iterations", result)
