"""Desk-scale federated training with client-level privacy accounting.

One synthetic-data logistic model, one local gradient step per client per
round, and the full pipeline clip -> scale -> privatize -> decode ->
aggregate -> account.  The harness validates plumbing and qualitative
trends, not paper-scale accuracies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .accounting import (
    DEFAULT_ALPHAS,
    DEFAULT_DELTA,
    MissingConstantsError,
    PrivacyLedger,
    baseline_budgets,
    l1_round_eps,
    l2_round_rdp,
    spent_epsilon,
)
from .baselines import BaselineConfig, gaussian_mech, laplace_mech, signsgd
from .mechanism import ClipConfig, InterpolatedMechanism, clip, privatize_vector
from .rng import substream


@dataclass(frozen=True)
class FlConfig:
    """Training-run parameters; every randomized step derives from ``seed``."""

    rounds: int
    cohort: int
    dims: int
    lr: float
    clip: ClipConfig
    mechanism: str = "identity"          # identity | imvu | laplace | gaussian | signsgd
    mech: InterpolatedMechanism | None = None
    noise: float | None = None           # sigma / laplace eps for baselines
    momentum: float = 0.5
    beta: float = 1.0
    seed: int = 0
    delta: float = DEFAULT_DELTA
    client_samples: int = 1
    n_train: int = 600
    n_classes: int = 2
    separation: float = 4.0
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    server_lr_scale: float = 1.0          # signsgd runs with a reduced scale
    data_seed: int | None = None          # defaults to seed; fix it to compare
                                          # budgets on one dataset

    def __post_init__(self):
        if min(self.rounds, self.cohort, self.dims, self.client_samples, self.n_train) < 1:
            raise ValueError("counts must be positive")
        if self.lr <= 0 or not (0.0 <= self.momentum < 1.0):
            raise ValueError("lr must be positive and momentum in [0, 1)")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.mechanism not in ("identity", "imvu", "laplace", "gaussian", "signsgd"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")


@dataclass(frozen=True, eq=False)
class TrainResult:
    accuracy: np.ndarray       # one entry per round
    spent_eps: np.ndarray      # non-decreasing
    final_accuracy: float
    ledger: PrivacyLedger | None

    def to_csv(self, path_or_buffer) -> None:
        own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
        handle = open(path_or_buffer, "w", newline="") if own else path_or_buffer
        try:
            writer = csv.writer(handle)
            writer.writerow(["round", "accuracy", "eps"])
            for t, (acc, eps) in enumerate(zip(self.accuracy, self.spent_eps), start=1):
                writer.writerow([t, repr(float(acc)), repr(float(eps))])
        finally:
            if own:
                handle.close()

    def summary(self) -> dict:
        return {
            "rounds": int(self.accuracy.size),
            "final_accuracy": self.final_accuracy,
            "final_eps": float(self.spent_eps[-1]) if self.spent_eps.size else 0.0,
        }


def generate_synthetic(n: int, d: int, n_classes: int, separation: float, seed: int):
    """Balanced Gaussian class clusters with controlled separation.

    Cluster centers sit ``separation`` apart (pairwise, in expectation for
    k > 2) on top of unit isotropic noise; separation 0 makes the classes
    indistinguishable.  Deterministic under the seed.
    """
    if n_classes < 2 or n < n_classes:
        raise ValueError("need n >= n_classes >= 2")
    rng = substream(seed, "synthetic-data")
    centers = rng.normal(size=(n_classes, d))
    centers -= centers.mean(axis=0)
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = np.where(norms > 0, centers / norms, centers) * (separation / 2.0)
    per_class = n // n_classes
    counts = [per_class + (1 if c < n % n_classes else 0) for c in range(n_classes)]
    xs, ys = [], []
    for c, cnt in enumerate(counts):
        xs.append(rng.normal(size=(cnt, d)) + centers[c])
        ys.append(np.full(cnt, c))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(n)
    return x[order], y[order]


def _signed_labels(y: np.ndarray) -> np.ndarray:
    return np.where(y == 0, -1.0, 1.0)


def client_update(weights: np.ndarray, x: np.ndarray, y) -> np.ndarray:
    """Logistic-loss gradient for one client's sample(s).

    With a single local step the transmitted pseudo-gradient equals the raw
    gradient, so this is what the client sends before privatization.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y_signed = np.atleast_1d(np.asarray(y, dtype=float))
    margins = y_signed * (x @ weights)
    # d/dw log(1 + exp(-y w.x)) averaged over the client's samples
    coeff = -y_signed / (1.0 + np.exp(margins))
    return (coeff[:, None] * x).mean(axis=0)


def _build_ledger(cfg: FlConfig) -> PrivacyLedger | None:
    """Per-round cost of the configured mechanism; None for identity."""
    if cfg.mechanism == "identity":
        return None
    if cfg.mechanism == "imvu":
        mech = cfg.mech
        if mech is None:
            raise MissingConstantsError("imvu training needs a mechanism with constants")
        if mech.clip.norm == "l1":
            per_round = l1_round_eps(mech, mech.beta)   # raises if eps' missing
            return PrivacyLedger("pure", per_round, cfg.rounds, delta=cfg.delta)
        if mech.fisher_m is None:
            raise MissingConstantsError(
                "fisher_m not attached; run attach_accounting on an anadromic table"
            )
        per_round = l2_round_rdp(mech.fisher_m, mech.beta, cfg.alphas)
        return PrivacyLedger("rdp", per_round, cfg.rounds, delta=cfg.delta, alphas=cfg.alphas)
    if cfg.noise is None or cfg.noise <= 0:
        raise ValueError(f"{cfg.mechanism} needs a positive noise parameter")
    if cfg.mechanism == "laplace":
        per_round = baseline_budgets("laplace_pure", eps=cfg.noise)
        return PrivacyLedger("pure", per_round, cfg.rounds, delta=cfg.delta)
    per_round = baseline_budgets("gaussian_rdp", sigma=cfg.noise, alphas=cfg.alphas)
    return PrivacyLedger("rdp", per_round, cfg.rounds, delta=cfg.delta, alphas=cfg.alphas)


def _client_message(cfg: FlConfig, baseline: BaselineConfig | None, grad: np.ndarray,
                    round_idx: int, client_idx: int,
                    rng: np.random.Generator) -> np.ndarray:
    if cfg.mechanism == "identity":
        return clip(grad, cfg.clip)
    if cfg.mechanism == "imvu":
        seed = int(substream(cfg.seed, "privatize", round_idx, client_idx).integers(2**62))
        _, decoded = privatize_vector(cfg.mech, grad, seed)
        return decoded
    fn = {"laplace": laplace_mech, "gaussian": gaussian_mech, "signsgd": signsgd}[cfg.mechanism]
    return fn(grad, baseline, rng)


def train_fl(cfg: FlConfig) -> TrainResult:
    """Run the training loop; deterministic under cfg.seed.

    Per round: sample a cohort, compute one local gradient per client,
    privatize, average the decoded messages on the server, and apply a
    momentum SGD step.  The server update is exactly the mean message times
    the learning rate (times the SignSGD scale) plus the momentum term.
    """
    if cfg.n_classes != 2:
        raise ValueError("the linear training head is binary; use n_classes=2")
    if cfg.mechanism == "imvu":
        if cfg.mech is None:
            raise MissingConstantsError("imvu training needs cfg.mech")
        if cfg.mech.table.bits < 1:
            raise ValueError("mechanism table has no output bits")
    ledger = _build_ledger(cfg)
    # baseline configs validate clip-norm pairings; fail before training
    baseline = None
    if cfg.mechanism in ("laplace", "gaussian", "signsgd"):
        baseline = BaselineConfig(cfg.mechanism, cfg.clip, cfg.noise)

    data_seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    x, y = generate_synthetic(cfg.n_train, cfg.dims, cfg.n_classes, cfg.separation, data_seed)
    y_signed = _signed_labels(y)
    client_slices = np.array_split(np.arange(cfg.n_train), cfg.n_train // cfg.client_samples)

    weights = np.zeros(cfg.dims)
    velocity = np.zeros(cfg.dims)
    cohort_rng = substream(cfg.seed, "cohort")
    noise_rng = substream(cfg.seed, "baseline-noise")

    accuracy = np.empty(cfg.rounds)
    spent = np.empty(cfg.rounds)
    for t in range(cfg.rounds):
        chosen = cohort_rng.choice(len(client_slices), size=min(cfg.cohort, len(client_slices)),
                                   replace=False)
        messages = np.empty((chosen.size, cfg.dims))
        for slot, ci in enumerate(chosen):
            rows = client_slices[ci]
            grad = client_update(weights, x[rows], y_signed[rows])
            messages[slot] = _client_message(cfg, baseline, grad, t, int(ci), noise_rng)
        mean_message = messages.mean(axis=0)
        velocity = cfg.momentum * velocity + mean_message
        weights = weights - cfg.lr * cfg.server_lr_scale * velocity

        accuracy[t] = float(np.mean((x @ weights) * y_signed > 0))
        spent[t] = spent_epsilon(ledger, t + 1) if ledger is not None else np.inf

    return TrainResult(
        accuracy=accuracy,
        spent_eps=spent,
        final_accuracy=float(accuracy[-1]),
        ledger=ledger,
    )
