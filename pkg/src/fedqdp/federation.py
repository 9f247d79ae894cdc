"""Federated averaging over quantized links with exact bit accounting.

Each round the server picks a client subset, broadcasts quantized global
parameters, clients train locally (optionally clipping gradients and adding
Laplace noise before upload), quantize at their scheduled bit width, and
the server averages the dequantized uploads weighted by dataset size.
Every quantized message costs elements * bits plus a fixed per-tensor
header (one fp32 scale and a one-byte width tag).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from fedqdp import rng as streams
from fedqdp.data import (
    LabeledDataset,
    dirichlet_partition,
    label_histogram,
    load_idx,
    power_law_two_class_partition,
    synthetic_blobs,
)
from fedqdp.models import (
    ModelSpec,
    ParamSet,
    clip_gradient_l1,
    init_params,
    loss_and_grad,
    predict,
    sgd_step,
)
from fedqdp.privacy import (
    BatchTrace,
    DpConfig,
    RoundScaling,
    SensitivityInputs,
    laplace_noise,
    lipschitz_estimate,
    noise_scale,
    perturb,
    sensitivity,
)
from fedqdp.quantize import QuantizedParamSet, dequantize_params, quantize_params
from fedqdp.schedule import ImportanceInputs, ScheduleConfig, schedule_bits

SCALE_BITS = 32
TAG_BITS = 8


@dataclass(frozen=True)
class BlobsConfig:
    """Synthetic Gaussian-blob dataset: independent train and test draws."""

    num_classes: int = 3
    input_dim: int = 2
    train_per_class: int = 200
    test_per_class: int = 50
    spread: float = 0.1


@dataclass(frozen=True)
class IdxConfig:
    """Train/test IDX file quadruple (images + labels each)."""

    train_images: str
    train_labels: str
    test_images: str
    test_labels: str


@dataclass(frozen=True)
class PartitionConfig:
    scheme: str = "dirichlet"
    alpha: float = 0.5
    exponent: float = 1.2

    def __post_init__(self):
        if self.scheme not in ("dirichlet", "power_law"):
            raise ValueError(f"scheme must be 'dirichlet' or 'power_law', got {self.scheme!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    schedule: ScheduleConfig
    data: BlobsConfig | IdxConfig
    partition: PartitionConfig
    dp: DpConfig | None = None
    rounds: int = 100
    num_clients: int = 50
    clients_per_round: int = 5
    local_epochs: int = 5
    batch_size: int = 64
    eta: float = 0.1
    seed: int = 0
    eval_every: int = 10

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        if self.num_clients < 1:
            raise ValueError(f"num_clients must be >= 1, got {self.num_clients}")
        if not (1 <= self.clients_per_round <= self.num_clients):
            raise ValueError(
                f"need 1 <= clients_per_round <= num_clients, "
                f"got {self.clients_per_round} and {self.num_clients}"
            )
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.schedule.total_rounds != max(self.rounds, 1):
            raise ValueError(
                f"schedule.total_rounds {self.schedule.total_rounds} must equal "
                f"max(rounds, 1) = {max(self.rounds, 1)}"
            )


@dataclass
class ServerState:
    """Mutable server view: current round, parameters, cumulative bits."""

    round: int
    params: ParamSet
    downlink_bits: int = 0
    uplink_bits: int = 0


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    params: QuantizedParamSet
    dataset_size: int
    bits: int


@dataclass(frozen=True)
class RoundRecord:
    """One row of run metrics. Accuracies are None on non-evaluation rounds
    and recorded at 1e-6 resolution otherwise."""

    t: int
    selected: tuple[int, ...]
    downlink_bits: int
    uplink_bits: int
    mean_bits: float
    test_acc: float | None
    train_acc: float | None


@dataclass(frozen=True, eq=False)
class ClientData:
    """One client's shard plus its label histogram."""

    client_id: int
    features: np.ndarray
    labels: np.ndarray
    label_counts: np.ndarray

    @property
    def size(self) -> int:
        return self.features.shape[0]


def comm_cost(q: QuantizedParamSet) -> int:
    """Bits to transmit one quantized parameter message."""
    return sum(qt.num_elements * qt.bits + SCALE_BITS + TAG_BITS for _, qt in q.entries)


def fp32_cost(params: ParamSet) -> int:
    """Bits to transmit the same parameters as raw float32."""
    return 32 * params.num_elements


def select_clients(num_clients: int, per_round: int, t: int, seed: int) -> np.ndarray:
    """Uniform sample of per_round distinct client ids, sorted ascending.

    Depends only on (num_clients, per_round, t, seed)."""
    if not (1 <= per_round <= num_clients):
        raise ValueError(
            f"need 1 <= per_round <= num_clients, got {per_round} and {num_clients}"
        )
    gen = streams.substream(seed, streams.SELECTION, t)
    ids = gen.choice(num_clients, size=per_round, replace=False)
    return np.sort(ids).astype(np.int64)


def evaluate(spec: ModelSpec, params: ParamSet, dataset: LabeledDataset) -> float:
    """Fraction of correct argmax predictions; ties go to the lowest class id."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(spec, params, dataset.features) == dataset.labels))


def broadcast_bits(schedule_cfg: ScheduleConfig, t: int) -> int:
    """Bit width of the server broadcast: static width, or the cosine width
    at full weight. The dynamic mode damps uploads only."""
    if schedule_cfg.mode == "dynamic":
        schedule_cfg = replace(schedule_cfg, mode="cosine")
    return schedule_bits(schedule_cfg, t)


def client_update(
    q_global: QuantizedParamSet,
    client: ClientData,
    cfg: ExperimentConfig,
    t: int,
    max_dataset_size: int,
) -> ClientUpdate:
    """One client's round: local SGD from the dequantized broadcast, then
    optional Laplace perturbation, then quantized upload.

    The sample order is shuffled once per round and reused for every local
    epoch, so an epoch pair visits identical batches and their gradient
    difference estimates local smoothness. All randomness comes from
    streams keyed on (seed, purpose, t, client_id).
    """
    params = dequantize_params(q_global)
    n_i = client.size
    order = streams.substream(
        cfg.seed, streams.CLIENT_BATCHING, t, client.client_id
    ).permutation(n_i)
    batches = [order[s : s + cfg.batch_size] for s in range(0, n_i, cfg.batch_size)]

    trace = BatchTrace() if cfg.dp is not None else None
    for _ in range(cfg.local_epochs):
        if trace is not None:
            trace.start_epoch()
        for batch in batches:
            _, grad = loss_and_grad(cfg.model, params, client.features[batch], client.labels[batch])
            if cfg.dp is not None:
                trace.record(grad, params)
                grad = clip_gradient_l1(grad, cfg.dp.xi)
            params = sgd_step(params, grad, cfg.eta)

    if cfg.dp is not None:
        lam = lipschitz_estimate(trace)
        sens = sensitivity(
            SensitivityInputs(lam, cfg.eta, cfg.local_epochs, n_i, cfg.dp.xi)
        )
        scale = noise_scale(
            sens,
            cfg.dp,
            RoundScaling(
                participants=cfg.clients_per_round,
                total_rounds=cfg.rounds,
                num_clients=cfg.num_clients,
                local_epochs=cfg.local_epochs,
            ),
        )
        noise = laplace_noise(
            scale, params, streams.substream(cfg.seed, streams.CLIENT_NOISE, t, client.client_id)
        )
        params = perturb(params, noise)

    importance = ImportanceInputs(
        label_counts=client.label_counts,
        dataset_size=n_i,
        max_dataset_size=max_dataset_size,
        num_classes=cfg.model.num_classes,
    )
    bits = schedule_bits(cfg.schedule, t, importance)
    q = quantize_params(
        params, bits, streams.substream(cfg.seed, streams.CLIENT_ROUNDING, t, client.client_id)
    )
    return ClientUpdate(params=q, dataset_size=n_i, bits=bits)


def aggregate(updates: list[ClientUpdate]) -> ParamSet:
    """Dataset-size weighted average of dequantized updates."""
    if not updates:
        raise ValueError("cannot aggregate zero updates")
    total = float(sum(u.dataset_size for u in updates))
    acc = dequantize_params(updates[0].params).scale(updates[0].dataset_size / total)
    for u in updates[1:]:
        acc = acc + dequantize_params(u.params).scale(u.dataset_size / total)
    return acc


def make_datasets(
    data_cfg: BlobsConfig | IdxConfig, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Build (train, test). Blob draws use dedicated streams off the seed;
    IDX files are loaded as-is with a shared class count."""
    if isinstance(data_cfg, BlobsConfig):
        train = synthetic_blobs(
            data_cfg.num_classes,
            data_cfg.input_dim,
            data_cfg.train_per_class,
            data_cfg.spread,
            streams.substream(seed, streams.DATA, 0),
        )
        test = synthetic_blobs(
            data_cfg.num_classes,
            data_cfg.input_dim,
            data_cfg.test_per_class,
            data_cfg.spread,
            streams.substream(seed, streams.DATA, 1),
        )
        return train, test
    train = load_idx(data_cfg.train_images, data_cfg.train_labels)
    test = load_idx(data_cfg.test_images, data_cfg.test_labels)
    k = max(train.num_classes, test.num_classes)
    if train.num_classes != k:
        train = LabeledDataset(train.features, train.labels, k)
    if test.num_classes != k:
        test = LabeledDataset(test.features, test.labels, k)
    return train, test


def partition_dataset(train: LabeledDataset, cfg: ExperimentConfig) -> list[np.ndarray]:
    gen = streams.substream(cfg.seed, streams.PARTITION)
    if cfg.partition.scheme == "dirichlet":
        return dirichlet_partition(train.labels, cfg.num_clients, cfg.partition.alpha, gen)
    return power_law_two_class_partition(
        train.labels, cfg.num_clients, cfg.partition.exponent, gen
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 0, round_hook=None) -> list[RoundRecord]:
    """Run the full protocol and return one RoundRecord per round.

    workers > 1 trains the round's clients on a thread pool; results are
    identical to the serial run because clients share no mutable state and
    aggregation follows the sorted selection order. round_hook, when given,
    is called with (ServerState, RoundRecord) after every round.
    Accuracies are computed every eval_every rounds and on the final round.
    """
    train, test = make_datasets(cfg.data, cfg.seed)
    if cfg.model.input_dim != train.input_dim:
        raise ValueError(
            f"model input_dim {cfg.model.input_dim} != dataset input_dim {train.input_dim}"
        )
    if cfg.model.num_classes != train.num_classes:
        raise ValueError(
            f"model num_classes {cfg.model.num_classes} != dataset classes {train.num_classes}"
        )
    parts = partition_dataset(train, cfg)
    clients = [
        ClientData(
            client_id=i,
            features=train.features[p],
            labels=train.labels[p],
            label_counts=label_histogram(train, p),
        )
        for i, p in enumerate(parts)
    ]
    state = ServerState(round=0, params=init_params(cfg.model, streams.substream(cfg.seed, streams.INIT)))

    records: list[RoundRecord] = []
    for t in range(cfg.rounds):
        ids = select_clients(cfg.num_clients, cfg.clients_per_round, t, cfg.seed)
        b_t = broadcast_bits(cfg.schedule, t)
        q_global = quantize_params(
            state.params, b_t, streams.substream(cfg.seed, streams.SERVER_ROUNDING, t)
        )
        downlink = cfg.clients_per_round * comm_cost(q_global)
        selected = [clients[i] for i in ids]
        n_max = max(c.size for c in selected)
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                updates = list(
                    pool.map(lambda c: client_update(q_global, c, cfg, t, n_max), selected)
                )
        else:
            updates = [client_update(q_global, c, cfg, t, n_max) for c in selected]
        uplink = sum(comm_cost(u.params) for u in updates)

        state.params = aggregate(updates)
        state.round = t + 1
        state.downlink_bits += downlink
        state.uplink_bits += uplink

        do_eval = ((t + 1) % cfg.eval_every == 0) or (t == cfg.rounds - 1)
        test_acc = round(evaluate(cfg.model, state.params, test), 6) if do_eval else None
        train_acc = round(evaluate(cfg.model, state.params, train), 6) if do_eval else None
        record = RoundRecord(
            t=t,
            selected=tuple(int(i) for i in ids),
            downlink_bits=downlink,
            uplink_bits=uplink,
            mean_bits=round(float(np.mean([u.bits for u in updates])), 6),
            test_acc=test_acc,
            train_acc=train_acc,
        )
        records.append(record)
        if round_hook is not None:
            round_hook(state, record)
    return records
