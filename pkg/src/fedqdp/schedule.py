"""Bit-length schedules.

Three modes: a fixed width, cosine annealing from b_max down to b_min over
the run, and a per-client variant that damps the cosine by an importance
weight mixing normalized label entropy with relative dataset size. The
annealing argument is t / (T - 1), so round 0 uses b_max and the final
round uses b_min exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fedqdp.quantize import BITS_MAX, BITS_MIN

MODES = ("static", "cosine", "dynamic")


@dataclass(frozen=True)
class ScheduleConfig:
    mode: str
    b_max: int = 32
    b_min: int = 8
    total_rounds: int = 1
    lambda_h: float = 0.75
    bits: int = 32  # static mode only

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (BITS_MIN <= self.b_min <= self.b_max <= BITS_MAX):
            raise ValueError(
                f"need {BITS_MIN} <= b_min <= b_max <= {BITS_MAX}, "
                f"got b_min={self.b_min}, b_max={self.b_max}"
            )
        if self.total_rounds < 1:
            raise ValueError(f"total_rounds must be >= 1, got {self.total_rounds}")
        if not (0.0 <= self.lambda_h <= 1.0):
            raise ValueError(f"lambda_h must lie in [0, 1], got {self.lambda_h}")
        if self.mode == "static" and not (BITS_MIN <= self.bits <= BITS_MAX):
            raise ValueError(f"static bits must lie in [{BITS_MIN}, {BITS_MAX}], got {self.bits}")


@dataclass(frozen=True)
class ImportanceInputs:
    """Per-client quantities the dynamic schedule depends on."""

    label_counts: np.ndarray
    dataset_size: int
    max_dataset_size: int
    num_classes: int

    def __post_init__(self):
        counts = np.asarray(self.label_counts)
        if counts.ndim != 1 or counts.shape[0] != self.num_classes:
            raise ValueError(f"label_counts must have length {self.num_classes}")
        if np.any(counts < 0):
            raise ValueError("label_counts must be non-negative")
        if int(counts.sum()) != self.dataset_size:
            raise ValueError(
                f"label_counts sum {int(counts.sum())} != dataset_size {self.dataset_size}"
            )
        if not (1 <= self.dataset_size <= self.max_dataset_size):
            raise ValueError(
                f"need 1 <= dataset_size <= max_dataset_size, "
                f"got {self.dataset_size} and {self.max_dataset_size}"
            )
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")


def cosine_bits(t: int, horizon: int, b_max: float, b_min: float, nu: float) -> float:
    """Real-valued annealed width b_min + nu * (b_max - b_min) * (1 + cos(pi t / horizon)) / 2."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not (0 <= t <= horizon):
        raise ValueError(f"t must lie in [0, {horizon}], got {t}")
    if not (0.0 <= nu <= 1.0):
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    if b_min > b_max:
        raise ValueError(f"b_min {b_min} exceeds b_max {b_max}")
    return b_min + nu * (b_max - b_min) * (1.0 + np.cos(np.pi * t / horizon)) / 2.0


def round_bits(b: float, b_min: int, b_max: int) -> int:
    """Round half up to an integer, then clamp into [b_min, b_max]."""
    if not np.isfinite(b):
        raise ValueError(f"cannot round non-finite width {b}")
    rounded = int(np.floor(b + 0.5))
    return max(int(b_min), min(int(b_max), rounded))


def normalized_entropy(label_counts: np.ndarray, num_classes: int) -> float:
    """Shannon entropy of the label distribution divided by log2(num_classes).

    Lies in [0, 1]: 0 for a single-class dataset, 1 for a uniform one.
    """
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    counts = np.asarray(label_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.shape[0] != num_classes:
        raise ValueError(f"label_counts must have length {num_classes}")
    if np.any(counts < 0):
        raise ValueError("label_counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("label_counts must sum to a positive value")
    p = counts[counts > 0] / total
    h = -np.sum(p * np.log2(p)) / np.log2(num_classes)
    # float noise can push a uniform distribution a few ulp past 1
    return float(min(1.0, max(0.0, h)))


def client_importance(inputs: ImportanceInputs, lambda_h: float) -> float:
    """Mix of label entropy and relative dataset size, in [0, 1].

    lambda_h weights the entropy term; 1 - lambda_h weights
    dataset_size / max_dataset_size.
    """
    if not (0.0 <= lambda_h <= 1.0):
        raise ValueError(f"lambda_h must lie in [0, 1], got {lambda_h}")
    entropy = normalized_entropy(inputs.label_counts, inputs.num_classes)
    size_ratio = inputs.dataset_size / inputs.max_dataset_size
    return lambda_h * entropy + (1.0 - lambda_h) * size_ratio


def schedule_bits(cfg: ScheduleConfig, t: int, importance: ImportanceInputs | None = None) -> int:
    """Integer bit width for round t.

    static ignores t; cosine anneals with full weight; dynamic damps the
    annealed term by the client importance and requires importance inputs.
    """
    if not (0 <= t < cfg.total_rounds):
        raise ValueError(f"round {t} outside [0, {cfg.total_rounds})")
    if cfg.mode == "static":
        return cfg.bits
    if cfg.mode == "dynamic":
        if importance is None:
            raise ValueError("dynamic schedule requires importance inputs")
        nu = client_importance(importance, cfg.lambda_h)
    else:
        nu = 1.0
    horizon = max(cfg.total_rounds - 1, 1)
    return round_bits(cosine_bits(t, horizon, cfg.b_max, cfg.b_min, nu), cfg.b_min, cfg.b_max)
