"""Random-sampling baselines.

Uniform client sampling replaces the event trigger to obtain the
FedADMM comparison, and the FedAvg / FedProx local update rules fall
out of the same round machinery by dropping the proximal coupling and
the dual variables respectively, with participant-only averaging on the
server.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolationError
from .objectives import Objective, ProxProblem, prox_solve


@dataclass
class SamplerSpec:
    """Uniform-without-replacement sampling at a fixed rate."""

    rate: float
    seed: int = 0
    scheme: str = "uniform_without_replacement"

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ContractViolationError("sampling rate must lie in (0, 1]")
        if self.scheme != "uniform_without_replacement":
            raise ContractViolationError(f"unknown sampling scheme: {self.scheme!r}")

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def draws_per_round(self, n_clients: int) -> int:
        return math.ceil(self.rate * n_clients)


def sample_uniform(n_clients: int, rate: float, rng: np.random.Generator) -> set[int]:
    """Draw ceil(rate * n_clients) distinct client indices uniformly."""
    if n_clients < 1:
        raise ContractViolationError("need at least one client")
    if not 0.0 < rate <= 1.0:
        raise ContractViolationError("sampling rate must lie in (0, 1]")
    count = math.ceil(rate * n_clients)
    picks = rng.choice(n_clients, size=count, replace=False)
    return {int(i) for i in picks}


def fedavg_local(obj: Objective, omega, steps: int, lr: float) -> np.ndarray:
    """FedAvg local update: plain gradient descent started from omega."""
    if steps < 1:
        raise ContractViolationError("need at least one local step")
    if not lr > 0:
        raise ContractViolationError("learning rate must be positive")
    theta = np.asarray(omega, dtype=float).copy()
    for _ in range(steps):
        theta = theta - lr * obj.gradient(theta)
    return theta


def fedprox_local(obj: Objective, omega, mu: float, eps: float) -> np.ndarray:
    """FedProx local update: proximal solve anchored at omega, no dual."""
    omega = np.asarray(omega, dtype=float)
    return prox_solve(obj, ProxProblem(anchor=omega, rho=mu, tolerance=eps, warm_start=omega))


def fedadmm_round(server, clients, objectives, cfg, rng):
    """One uniformly sampled ADMM round: run_round with random selection."""
    from .engine import run_round

    return run_round(server, clients, None, objectives, replace(cfg, algorithm="fedadmm"), rng)
