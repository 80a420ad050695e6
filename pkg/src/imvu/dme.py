"""Bias/variance sweeps and distributed mean estimation comparisons."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .baselines import BaselineConfig, gaussian_mech, laplace_mech, signsgd
from .mechanism import (
    ClipConfig,
    InterpolatedMechanism,
    MechanismTable,
    clip,
    decode,
    moments,
    mvu_dither_moments,
    privatize_vector,
    scale_input,
)

SWEEP_POINTS = 201
UNCOMPRESSED_BITS = 32.0


@dataclass(frozen=True)
class SweepRow:
    mechanism: str
    b_in: int
    x: float
    mean: float
    bias: float
    variance: float


@dataclass(frozen=True)
class SweepReport:
    """Closed-form moment rows for every (mechanism, table, x) combination."""

    rows: tuple[SweepRow, ...]
    laplace_variance: float

    def max_abs_bias(self, mechanism: str, b_in: int) -> float:
        return max(abs(r.bias) for r in self.rows if r.mechanism == mechanism and r.b_in == b_in)

    def variances(self, mechanism: str, b_in: int) -> np.ndarray:
        return np.array(
            [r.variance for r in self.rows if r.mechanism == mechanism and r.b_in == b_in]
        )

    def to_csv(self, path_or_buffer) -> None:
        """CSV with header mechanism,b_in,x,mean,bias,variance,laplace_ref."""
        own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
        handle = open(path_or_buffer, "w", newline="") if own else path_or_buffer
        try:
            writer = csv.writer(handle)
            writer.writerow(["mechanism", "b_in", "x", "mean", "bias", "variance", "laplace_ref"])
            for r in self.rows:
                writer.writerow(
                    [r.mechanism, r.b_in, repr(r.x), repr(r.mean), repr(r.bias),
                     repr(r.variance), repr(self.laplace_variance)]
                )
        finally:
            if own:
                handle.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def sweep_bias_variance(tables, eps: float, x_grid=None) -> SweepReport:
    """Closed-form moment sweep of the dithered and interpolated samplers.

    All tables must share the output width and the design epsilon so the
    comparison across b_in is apples to apples.  The Laplace reference
    variance at equal epsilon is 2/eps^2.  Deterministic: no sampling.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("need at least one table")
    b_out = tables[0].b_out
    for t in tables:
        if t.b_out != b_out or abs(t.design_eps - eps) > 1e-12:
            raise ValueError("tables must share b_out and the design epsilon")
    xs = np.linspace(0.0, 1.0, SWEEP_POINTS) if x_grid is None else np.asarray(x_grid, float)

    rows: list[SweepRow] = []
    for table in tables:
        mean_i, var_i = moments(table, xs)
        mean_m, var_m = mvu_dither_moments(table, xs)
        for k, x in enumerate(xs):
            rows.append(SweepRow("imvu", table.b_in, float(x), float(mean_i[k]),
                                 float(mean_i[k] - x), float(var_i[k])))
        for k, x in enumerate(xs):
            rows.append(SweepRow("mvu", table.b_in, float(x), float(mean_m[k]),
                                 float(mean_m[k] - x), float(var_m[k])))
    return SweepReport(rows=tuple(rows), laplace_variance=2.0 / eps**2)


def gaussian_inputs(scale: float = 0.1):
    """Client vectors with iid N(0, scale^2) coordinates."""

    def draw(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        return rng.normal(0.0, scale, size=(n, d))

    return draw


def sphere_inputs(radius: float = 1.0):
    """Client vectors uniform on the radius-``radius`` sphere."""

    def draw(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        g = rng.normal(size=(n, d))
        return radius * g / np.linalg.norm(g, axis=1, keepdims=True)

    return draw


def _privatize_clients(mechanism: str, cfg, u: np.ndarray, rng: np.random.Generator):
    """(decoded client messages, bits per coordinate) for one cohort."""
    n, d = u.shape
    if mechanism == "identity":
        if cfg is None:
            return u.copy(), UNCOMPRESSED_BITS
        # plumbing mode: exercise clip -> scale -> decode without sampling
        out = np.empty_like(u)
        for i in range(n):
            clipped = clip(u[i], cfg.clip if isinstance(cfg, InterpolatedMechanism) else cfg)
            if isinstance(cfg, InterpolatedMechanism):
                out[i] = decode(scale_input(clipped, cfg.clip.clip_c, cfg.beta),
                                cfg.clip.clip_c, cfg.beta)
            else:
                out[i] = clipped
        return out, UNCOMPRESSED_BITS
    if mechanism == "imvu":
        if not isinstance(cfg, InterpolatedMechanism):
            raise ValueError("imvu needs an InterpolatedMechanism config")
        out = np.empty_like(u)
        for i in range(n):
            seed = int(rng.integers(0, 2**63 - 1))
            _, out[i] = privatize_vector(cfg, u[i], seed)
        return out, float(cfg.table.bits)
    if mechanism in ("laplace", "gaussian", "signsgd"):
        if not isinstance(cfg, BaselineConfig):
            raise ValueError(f"{mechanism} needs a BaselineConfig")
        fn = {"laplace": laplace_mech, "gaussian": gaussian_mech, "signsgd": signsgd}[mechanism]
        out = np.stack([fn(u[i], cfg, rng) for i in range(n)])
        bits = 1.0 if mechanism == "signsgd" else UNCOMPRESSED_BITS
        return out, bits
    raise ValueError(f"unknown mechanism {mechanism!r}")


def dme_mse(
    n_clients: int,
    d: int,
    input_dist,
    mechanism: str,
    cfg,
    rng: np.random.Generator,
    trials: int = 1,
) -> tuple[float, float]:
    """Mean estimation error of a privatized cohort, plus the wire cost.

    Each trial draws ``n_clients`` vectors from ``input_dist(rng, n, d)``,
    privatizes them, and compares the server-side mean of the decoded
    messages against the true mean.  Returns the per-coordinate MSE averaged
    over trials and the exact bits per coordinate on the wire.
    """
    if n_clients < 1 or trials < 1:
        raise ValueError("n_clients and trials must be at least 1")
    errors = np.empty(trials)
    bits = UNCOMPRESSED_BITS
    for t in range(trials):
        u = input_dist(rng, n_clients, d)
        decoded, bits = _privatize_clients(mechanism, cfg, u, rng)
        err = decoded.mean(axis=0) - u.mean(axis=0)
        errors[t] = float(np.mean(err**2))
    return float(errors.mean()), bits
