"""Non-compressed and sign-compressed reference mechanisms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mechanism import ClipConfig, clip


@dataclass(frozen=True)
class BaselineConfig:
    """kind in {laplace, gaussian, signsgd}; ``noise`` is epsilon for laplace
    and the noise multiplier sigma for gaussian/signsgd."""

    kind: str
    clip: ClipConfig
    noise: float

    def __post_init__(self):
        if self.kind not in ("laplace", "gaussian", "signsgd"):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.kind == "laplace" and self.clip.norm != "l1":
            raise ValueError("laplace requires an l1 clip")
        if self.kind in ("gaussian", "signsgd") and self.clip.norm != "l2":
            raise ValueError(f"{self.kind} requires an l2 clip")
        if not (np.isfinite(self.noise) and self.noise > 0):
            raise ValueError("noise parameter must be positive and finite")


def laplace_mech(u: np.ndarray, cfg: BaselineConfig, rng: np.random.Generator) -> np.ndarray:
    """Clip to the L1 ball and add iid Laplace(C1/eps) noise per coordinate."""
    if cfg.kind != "laplace":
        raise ValueError("config is not a laplace config")
    clipped = clip(u, cfg.clip)
    scale = cfg.clip.clip_c / cfg.noise
    return clipped + rng.laplace(0.0, scale, size=clipped.shape)


def gaussian_mech(u: np.ndarray, cfg: BaselineConfig, rng: np.random.Generator) -> np.ndarray:
    """Clip to the L2 ball and add iid N(0, (sigma C2)^2) noise per coordinate."""
    if cfg.kind not in ("gaussian", "signsgd"):
        raise ValueError("config is not a gaussian-family config")
    clipped = clip(u, cfg.clip)
    std = cfg.noise * cfg.clip.clip_c
    return clipped + rng.normal(0.0, std, size=clipped.shape)


def signsgd(u: np.ndarray, cfg: BaselineConfig, rng: np.random.Generator) -> np.ndarray:
    """Coordinate-wise sign of the Gaussian mechanism's output.

    Post-processing, so the privacy cost is exactly the Gaussian one.  Exact
    zeros map to +1 to keep runs deterministic.
    """
    if cfg.kind != "signsgd":
        raise ValueError("config is not a signsgd config")
    noisy = gaussian_mech(u, cfg, rng)
    return np.where(noisy >= 0.0, 1.0, -1.0)
