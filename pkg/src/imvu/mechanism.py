"""Discrete mechanism tables and their dithered / natural-parameter samplers.

A mechanism table holds a uniform input grid on [0, 1], an output alphabet,
and one categorical distribution per grid point, stored as natural-log
probabilities.  Two samplers extend the table to continuous inputs:

* classic dithering, which mixes the probability rows of the bracketing grid
  points and is unbiased everywhere on [0, 1];
* natural-parameter interpolation, which mixes the log-probability rows and
  stays well defined for every real input at the cost of a small bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import coordinate_uniforms

# Construction tolerances for the table invariants.
ROW_SUM_TOL = 1e-9
METRIC_DP_TOL = 1e-9
UNBIASEDNESS_TOL = 1e-6
GRID_TOL = 1e-9

PROB_FLOOR = 1e-12


class TableInvariantError(ValueError):
    """A mechanism table violates one of its construction invariants."""

    def __init__(self, check: str, violation: float, tolerance: float, where: str = ""):
        self.check = check
        self.violation = float(violation)
        self.tolerance = float(tolerance)
        detail = f" ({where})" if where else ""
        super().__init__(
            f"invariant '{check}' violated{detail}: "
            f"max violation {self.violation:.3e} exceeds tolerance {self.tolerance:.3e}"
        )


@dataclass(frozen=True)
class ClipConfig:
    """Norm-ball projection: ``norm`` is 'l1' or 'l2', ``clip_c`` the radius C."""

    norm: str
    clip_c: float

    def __post_init__(self):
        if self.norm not in ("l1", "l2"):
            raise ValueError(f"clip norm must be 'l1' or 'l2', got {self.norm!r}")
        if not (np.isfinite(self.clip_c) and self.clip_c > 0):
            raise ValueError("clip_c must be positive and finite")


def table_violations(
    grid: np.ndarray,
    alphabet: np.ndarray,
    design_eps: float,
    log_probs: np.ndarray | None = None,
    probs: np.ndarray | None = None,
) -> dict[str, tuple[float, str]]:
    """Named invariant checks, each as (max violation, location detail).

    Accepts either log probabilities or raw probabilities so that arbitrary
    (possibly broken) data can be inspected before a table is constructed.
    Checks: grid_uniformity, alphabet_order, positivity, simplex,
    unbiasedness, metric_dp.
    """
    grid = np.asarray(grid, dtype=float)
    alphabet = np.asarray(alphabet, dtype=float)
    if probs is None:
        if log_probs is None:
            raise ValueError("need log_probs or probs")
        log_probs = np.asarray(log_probs, dtype=float)
        probs = np.exp(log_probs)
    else:
        probs = np.asarray(probs, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_probs = np.log(np.where(probs > 0, probs, np.nan))

    b_in = grid.shape[0]
    out: dict[str, tuple[float, str]] = {}

    delta = 1.0 / (b_in - 1)
    g_viol = max(
        abs(grid[0]),
        abs(grid[-1] - 1.0),
        float(np.max(np.abs(np.diff(grid) - delta))) if b_in > 1 else 0.0,
    )
    out["grid_uniformity"] = (g_viol, "grid endpoints / spacing")

    a_viol = float(max(0.0, np.max(alphabet[:-1] - alphabet[1:]))) if alphabet.size > 1 else 0.0
    out["alphabet_order"] = (a_viol, "alphabet must ascend")

    min_p = float(np.min(probs))
    if min_p <= 0.0 or not np.all(np.isfinite(log_probs)):
        i, j = np.unravel_index(int(np.argmin(probs)), probs.shape)
        out["positivity"] = (np.inf, f"row {i}, letter {j}")
    else:
        out["positivity"] = (0.0, "")

    row_sums = probs.sum(axis=1)
    i = int(np.argmax(np.abs(row_sums - 1.0)))
    out["simplex"] = (float(np.max(np.abs(row_sums - 1.0))), f"row {i}")

    means = probs @ alphabet
    i = int(np.argmax(np.abs(means - grid)))
    out["unbiasedness"] = (float(np.max(np.abs(means - grid))), f"row {i}")

    dp_viol, where = 0.0, ""
    if np.all(np.isfinite(log_probs)):
        for i in range(b_in):
            for k in range(i + 1, b_in):
                gap = np.abs(log_probs[i] - log_probs[k]) - design_eps * abs(grid[i] - grid[k])
                m = float(gap.max())
                if m > dp_viol:
                    dp_viol, where = m, f"rows ({i}, {k}), letter {int(gap.argmax())}"
    else:
        dp_viol, where = np.inf, "non-finite log probabilities"
    out["metric_dp"] = (dp_viol, where)
    return out


_CONSTRUCTION_TOLS = {
    "grid_uniformity": GRID_TOL,
    "alphabet_order": 0.0,
    "positivity": 0.0,
    "simplex": ROW_SUM_TOL,
    "unbiasedness": UNBIASEDNESS_TOL,
    "metric_dp": METRIC_DP_TOL,
}


@dataclass(frozen=True, eq=False)
class MechanismTable:
    """A designed discrete mechanism: grid, alphabet, log-probability rows.

    Immutable after construction and safe to share across workers.  All
    invariants are enforced here, so downstream samplers may assume finite
    log probabilities and normalized rows.
    """

    b_in: int
    b_out: int
    grid: np.ndarray
    alphabet: np.ndarray
    log_probs: np.ndarray
    design_eps: float
    metric: str = "l1"
    probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.b_in < 2 or self.b_out < 2:
            raise ValueError("b_in and b_out must both be at least 2")
        if self.metric != "l1":
            raise ValueError(f"unsupported metric {self.metric!r}")
        if not (np.isfinite(self.design_eps) and self.design_eps > 0):
            raise ValueError("design_eps must be positive and finite")

        grid = np.array(self.grid, dtype=float)
        alphabet = np.array(self.alphabet, dtype=float)
        log_probs = np.array(self.log_probs, dtype=float)
        if grid.shape != (self.b_in,):
            raise ValueError(f"grid must have shape ({self.b_in},)")
        if alphabet.shape != (self.b_out,):
            raise ValueError(f"alphabet must have shape ({self.b_out},)")
        if log_probs.shape != (self.b_in, self.b_out):
            raise ValueError(f"log_probs must have shape ({self.b_in}, {self.b_out})")

        checks = table_violations(grid, alphabet, self.design_eps, log_probs=log_probs)
        for name, (violation, where) in checks.items():
            tol = _CONSTRUCTION_TOLS[name]
            if violation > tol:
                raise TableInvariantError(name, violation, tol, where)

        probs = np.exp(log_probs)
        for arr in (grid, alphabet, log_probs, probs):
            arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "log_probs", log_probs)
        object.__setattr__(self, "probs", probs)

    @property
    def bits(self) -> int:
        """Wire width of one transmitted index."""
        return int(np.ceil(np.log2(self.b_out)))

    @property
    def spacing(self) -> float:
        return 1.0 / (self.b_in - 1)


@dataclass(frozen=True, eq=False)
class InterpolatedMechanism:
    """A mechanism table bound to an input scaling and clip configuration.

    ``eps_prime`` and ``fisher_m`` are certified accounting constants; they
    are attached by the accountant and re-verified when a mechanism file is
    loaded.  ``fisher_m`` only exists for two-row tables, where the
    interpolated log density is differentiable everywhere.
    """

    table: MechanismTable
    beta: float = 1.0
    clip: ClipConfig = ClipConfig("l2", 1.0)
    eps_prime: float | None = None
    fisher_m: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be positive and finite")
        if self.eps_prime is not None and not (np.isfinite(self.eps_prime) and self.eps_prime >= 0):
            raise ValueError("eps_prime must be a non-negative real")
        if self.fisher_m is not None:
            if self.table.b_in != 2:
                raise ValueError("fisher_m is only defined for tables with b_in=2")
            if not (np.isfinite(self.fisher_m) and self.fisher_m >= 0):
                raise ValueError("fisher_m must be a non-negative real")


def _table_of(mech) -> MechanismTable:
    return mech.table if isinstance(mech, InterpolatedMechanism) else mech


def natural_params(table: MechanismTable) -> np.ndarray:
    """Natural parameters of the table's categorical rows: eta_i = log p_i."""
    return np.array(_table_of(table).log_probs, copy=True)


def _check_finite_inputs(x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")


def interpolate_eta(mech, x) -> np.ndarray:
    """Piecewise-linear natural parameter at x.

    Inside [x_i, x_{i+1}] this is the convex combination of eta_i and
    eta_{i+1}; outside [0, 1] the boundary interval's affine rule is extended,
    which for b_in=2 is one global line.  Scalar x returns a vector, an array
    of x returns one row per input.
    """
    table = _table_of(mech)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_finite_inputs(xs)
    nseg = table.b_in - 1
    t = xs * nseg
    i = np.clip(np.floor(t).astype(int), 0, nseg - 1)
    frac = t - i
    eta = (1.0 - frac)[:, None] * table.log_probs[i] + frac[:, None] * table.log_probs[i + 1]
    return eta[0] if np.isscalar(x) or np.ndim(x) == 0 else eta


def log_pmf(mech, x) -> np.ndarray:
    """Log probabilities of the interpolated mechanism at x (full precision)."""
    eta = np.atleast_2d(interpolate_eta(mech, np.atleast_1d(np.asarray(x, dtype=float))))
    m = eta.max(axis=1, keepdims=True)
    lse = m + np.log(np.sum(np.exp(eta - m), axis=1, keepdims=True))
    out = eta - lse
    return out[0] if np.ndim(x) == 0 else out


def pmf(mech, x) -> np.ndarray:
    """Sampling probabilities of the interpolated mechanism at x.

    Softmax of the interpolated natural parameter, computed with
    max-subtraction; rows sum to 1 within 1e-12.
    """
    eta = np.atleast_2d(interpolate_eta(mech, np.atleast_1d(np.asarray(x, dtype=float))))
    z = np.exp(eta - eta.max(axis=1, keepdims=True))
    out = z / z.sum(axis=1, keepdims=True)
    return out[0] if np.ndim(x) == 0 else out


def _moments_from_probs(probs: np.ndarray, alphabet: np.ndarray):
    mean = probs @ alphabet
    var = probs @ (alphabet**2) - mean**2
    return mean, np.maximum(var, 0.0)


def moments(mech, x):
    """Mean and variance of the interpolated mechanism's output at x."""
    table = _table_of(mech)
    p = np.atleast_2d(pmf(mech, np.atleast_1d(np.asarray(x, dtype=float))))
    mean, var = _moments_from_probs(p, table.alphabet)
    if np.ndim(x) == 0:
        return float(mean[0]), float(var[0])
    return mean, var


def mvu_dither_pmf(table, x) -> np.ndarray:
    """Dithering probabilities: the convex mix of the bracketing rows.

    Only defined on [0, 1]; the dithered mechanism is unbiased there because
    every grid row is unbiased and the mix is linear.
    """
    table = _table_of(table)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_finite_inputs(xs)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("dithering requires x in [0, 1]")
    nseg = table.b_in - 1
    t = xs * nseg
    i = np.clip(np.floor(t).astype(int), 0, nseg - 1)
    frac = t - i
    p = (1.0 - frac)[:, None] * table.probs[i] + frac[:, None] * table.probs[i + 1]
    return p[0] if np.ndim(x) == 0 else p


def mvu_dither_moments(table, x):
    """Mean and variance of the dithered mechanism at x in [0, 1]."""
    table = _table_of(table)
    p = np.atleast_2d(mvu_dither_pmf(table, np.atleast_1d(np.asarray(x, dtype=float))))
    mean, var = _moments_from_probs(p, table.alphabet)
    if np.ndim(x) == 0:
        return float(mean[0]), float(var[0])
    return mean, var


def _inverse_cdf(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    # Strict comparison: j is the first index with u < cdf_j, so ties in the
    # cumulative sums resolve deterministically.
    cdf = np.cumsum(probs, axis=1)
    j = np.sum(uniforms[:, None] >= cdf, axis=1)
    return np.minimum(j, probs.shape[1] - 1)


def sample(mech, x: float, rng: np.random.Generator):
    """Draw one output at x; returns (index, alphabet value)."""
    p = pmf(mech, float(x))
    j = int(_inverse_cdf(p[None, :], np.array([rng.random()]))[0])
    return j, float(_table_of(mech).alphabet[j])


def sample_batch(mech, x: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n independent output indices at a fixed x."""
    p = pmf(mech, float(x))
    cdf = np.cumsum(p)
    u = rng.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.shape[0] - 1)


def clip(u: np.ndarray, cfg: ClipConfig) -> np.ndarray:
    """Project u onto the configured norm ball; inputs inside pass unchanged."""
    u = np.asarray(u, dtype=float)
    _check_finite_inputs(u)
    order = 1 if cfg.norm == "l1" else 2
    norm = float(np.linalg.norm(u.ravel(), ord=order))
    if norm <= cfg.clip_c:
        return u
    return u * (cfg.clip_c / norm)


def scale_input(u, clip_c: float, beta: float):
    """Map a clipped value u in [-C, C] to x = 1/2 + beta*u/(2C).

    Applied coordinate-wise to vectors.  beta=1 lands in [0, 1]; larger beta
    spreads concentrated inputs over (and beyond) the design range.
    """
    if clip_c <= 0 or beta <= 0:
        raise ValueError("clip_c and beta must be positive")
    return 0.5 + beta * np.asarray(u, dtype=float) / (2.0 * clip_c)


def decode(a, clip_c: float, beta: float):
    """Server-side inverse of scale_input: (2C/beta) * (a - 1/2)."""
    if clip_c <= 0 or beta <= 0:
        raise ValueError("clip_c and beta must be positive")
    return (2.0 * clip_c / beta) * (np.asarray(a, dtype=float) - 0.5)


def privatize_vector(
    mech: InterpolatedMechanism,
    u: np.ndarray,
    seed: int,
    coord_range: tuple[int, int] | None = None,
):
    """Privatize a client vector: clip, scale, sample each coordinate.

    Returns (indices, decoded values).  The indices are the wire form, one
    ``table.bits``-wide symbol per coordinate.  Randomness is a pure function
    of (seed, coordinate), so a worker evaluating only ``coord_range`` (a
    chunk-aligned [lo, hi) slice) produces exactly the slice a single worker
    would; results are independent of the worker count.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("u must be a non-empty 1-D vector")
    _check_finite_inputs(u)
    table = mech.table
    clipped = clip(u, mech.clip)
    x = scale_input(clipped, mech.clip.clip_c, mech.beta)
    lo, hi = (0, u.size) if coord_range is None else coord_range
    uniforms = coordinate_uniforms(seed, lo, hi, u.size)
    probs = pmf(mech, x[lo:hi])
    indices = _inverse_cdf(np.atleast_2d(probs), uniforms)
    decoded = decode(table.alphabet[indices], mech.clip.clip_c, mech.beta)
    return indices, decoded
