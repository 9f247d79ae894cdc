"""Local differential privacy for client updates.

Clients bound each gradient's L1 norm by xi during training, estimate a
local smoothness constant from consecutive-epoch gradient differences, turn
it into an L1 sensitivity for the final parameters, and add Laplace noise
calibrated to that sensitivity, the privacy budget, and how often a client
expects to participate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fedqdp import backend
from fedqdp.models import ParamSet, l1_norm


@dataclass(frozen=True)
class DpConfig:
    """Privacy budget per client. Only pure epsilon-DP is supported."""

    epsilon: float
    xi: float
    delta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not np.isfinite(self.xi) or self.xi <= 0:
            raise ValueError(f"xi must be positive and finite, got {self.xi}")
        if self.delta != 0.0:
            raise ValueError(f"only delta = 0 is supported, got {self.delta}")


@dataclass(frozen=True)
class SensitivityInputs:
    lambda_i: float
    eta: float
    local_epochs: int
    dataset_size: int
    xi: float

    def __post_init__(self):
        if not np.isfinite(self.lambda_i) or self.lambda_i < 0:
            raise ValueError(f"lambda_i must be non-negative and finite, got {self.lambda_i}")
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.dataset_size < 1:
            raise ValueError(f"dataset_size must be >= 1, got {self.dataset_size}")
        if not np.isfinite(self.xi) or self.xi <= 0:
            raise ValueError(f"xi must be positive and finite, got {self.xi}")


@dataclass(frozen=True)
class RoundScaling:
    """Participation counts that spread the budget over the whole run."""

    participants: int
    total_rounds: int
    num_clients: int
    local_epochs: int

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError(f"num_clients must be >= 1, got {self.num_clients}")
        if not (1 <= self.participants <= self.num_clients):
            raise ValueError(
                f"need 1 <= participants <= num_clients, "
                f"got {self.participants} and {self.num_clients}"
            )
        if self.total_rounds < 1:
            raise ValueError(f"total_rounds must be >= 1, got {self.total_rounds}")
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")


@dataclass
class BatchTrace:
    """Raw gradients and the parameters they were taken at, per epoch and batch.

    Gradients recorded here are the unclipped ones; the trace exists to
    estimate how fast the gradient field changes between epochs.
    """

    epochs: list[list[tuple[ParamSet, ParamSet]]] = field(default_factory=list)

    def start_epoch(self) -> None:
        self.epochs.append([])

    def record(self, grad: ParamSet, params: ParamSet) -> None:
        if not self.epochs:
            raise ValueError("record() before start_epoch()")
        self.epochs[-1].append((grad, params))

    def consecutive_pairs(self):
        """Yield ((grad, params), (grad', params')) for the same batch index
        in consecutive epochs."""
        for e in range(len(self.epochs) - 1):
            first, second = self.epochs[e], self.epochs[e + 1]
            for j in range(min(len(first), len(second))):
                yield first[j], second[j]


def lipschitz_estimate(trace: BatchTrace) -> float:
    """Max ratio ||grad - grad'||_1 / ||params - params'||_1 over all
    same-batch consecutive-epoch pairs. Pairs with identical parameters are
    skipped; no usable pair gives 0.0."""
    best = 0.0
    for (g1, p1), (g2, p2) in trace.consecutive_pairs():
        denom = l1_norm(p1 - p2)
        if denom == 0.0:
            continue
        best = max(best, l1_norm(g1 - g2) / denom)
    return best


def compute_e0(lambda_i: float, eta: float, dataset_size: int) -> int:
    """Smallest integer e with (1 + lambda_i * eta)^e >= 1 + dataset_size.

    Requires lambda_i > 0 and a growth factor strictly above 1.
    """
    if lambda_i <= 0:
        raise ValueError(f"lambda_i must be positive, got {lambda_i}")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if dataset_size < 1:
        raise ValueError(f"dataset_size must be >= 1, got {dataset_size}")
    growth = 1.0 + lambda_i * eta
    if growth <= 1.0:
        raise ValueError(f"growth factor 1 + lambda_i * eta rounds to {growth}, cannot reach the target")
    target = 1.0 + dataset_size
    hi = 1
    while growth**hi < target:
        hi *= 2
    lo = hi // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if growth**mid >= target:
            hi = mid
        else:
            lo = mid + 1
    return hi


def sensitivity(inputs: SensitivityInputs) -> float:
    """L1 sensitivity of the final local parameters to one sample change.

    Three regimes: a flat-gradient bound linear in epochs when lambda_i = 0,
    a geometric-growth bound while (1 + lambda_i eta)^E < 1 + n, and a
    saturated bound of 2 xi plus a linear tail once growth has crossed
    1 + n. The middle branch uses expm1/log1p so it meets the lambda_i = 0
    branch continuously.
    """
    lam, eta, epochs = inputs.lambda_i, inputs.eta, inputs.local_epochs
    n, xi = inputs.dataset_size, inputs.xi
    if lam == 0.0:
        return 2.0 * xi * epochs * eta / n
    growth = 1.0 + lam * eta
    if growth**epochs < 1.0 + n:
        return (2.0 * xi / (lam * n)) * np.expm1(epochs * np.log1p(lam * eta))
    e0 = compute_e0(lam, eta, n)
    return 2.0 * xi + 2.0 * eta * xi * (epochs - e0)


def noise_scale(sensitivity_value: float, dp: DpConfig, scaling: RoundScaling) -> float:
    """Laplace scale: expected participations per epoch times sensitivity
    over epsilon, i.e. (P T / (N E)) * sens / epsilon."""
    if not np.isfinite(sensitivity_value) or sensitivity_value < 0:
        raise ValueError(f"sensitivity must be non-negative and finite, got {sensitivity_value}")
    factor = (scaling.participants * scaling.total_rounds) / (
        scaling.num_clients * scaling.local_epochs
    )
    return factor * sensitivity_value / dp.epsilon


def laplace_noise(scale: float, like: ParamSet, rng: np.random.Generator) -> ParamSet:
    """Laplace(0, scale) noise shaped like the given parameters.

    Sampled by inverse CDF from uniforms on (-1/2, 1/2): scale = 0 returns
    exact zeros without consuming randomness.
    """
    if not np.isfinite(scale) or scale < 0:
        raise ValueError(f"scale must be non-negative and finite, got {scale}")
    if scale == 0.0:
        return like.zeros_like()
    out = {}
    for name, value in like.items():
        u = rng.random(value.size) - 0.5
        out[name] = backend.laplace_from_uniform(u, scale).reshape(value.shape)
    return ParamSet(out)


def perturb(params: ParamSet, noise: ParamSet) -> ParamSet:
    """Add noise to parameters; shapes must match exactly."""
    return params + noise
