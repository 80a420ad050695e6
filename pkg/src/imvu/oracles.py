"""Exact brute-force computations over the finite output space.

These are the ground truth for every certified bound: divergences are
evaluated by direct log-domain enumeration, never sampled, and the joint
computations enumerate the full product outcome space.
"""

from __future__ import annotations

import itertools

import numpy as np

from .mechanism import log_pmf

_PAIR_SUM_TOL = 1e-12
MAX_JOINT_OUTCOMES = 4096


def _check_pair(p: np.ndarray, q: np.ndarray):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be equal-length probability vectors")
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("probability vectors must be strictly positive")
    if abs(p.sum() - 1.0) > _PAIR_SUM_TOL or abs(q.sum() - 1.0) > _PAIR_SUM_TOL:
        raise ValueError("probability vectors must sum to 1 within 1e-12")
    return p, q


def exact_max_divergence(p, q) -> float:
    """Max divergence on finite support: max_j |log p_j - log q_j|."""
    p, q = _check_pair(p, q)
    return float(np.max(np.abs(np.log(p) - np.log(q))))


def exact_renyi(p, q, alpha: float) -> float:
    """Order-alpha Renyi divergence on finite support.

    (1/(alpha-1)) * log sum_j p_j^alpha q_j^(1-alpha), accumulated in the log
    domain.  Tends to the max divergence as alpha grows.
    """
    p, q = _check_pair(p, q)
    if not (np.isfinite(alpha) and alpha > 1.0):
        raise ValueError("alpha must be a finite real greater than 1")
    return _renyi_from_logs(np.log(p), np.log(q), alpha)


def _renyi_from_logs(lp: np.ndarray, lq: np.ndarray, alpha: float) -> float:
    if np.isinf(alpha):
        return float(np.max(np.abs(lp - lq)))
    t = alpha * lp + (1.0 - alpha) * lq
    m = t.max()
    return float((m + np.log(np.sum(np.exp(t - m)))) / (alpha - 1.0))


def joint_divergence_bruteforce(mech, xvec, xvec_prime, alpha: float, max_dim: int = 3) -> float:
    """Renyi divergence of the full product distribution, by enumeration.

    Enumerates all b_out^d outcomes of the coordinate-independent mechanism
    at the two input vectors; by independence this equals the sum of the
    coordinate divergences, which the tests assert.  alpha may be np.inf for
    the max divergence.
    """
    xvec = np.asarray(xvec, dtype=float)
    xvec_prime = np.asarray(xvec_prime, dtype=float)
    if xvec.shape != xvec_prime.shape or xvec.ndim != 1:
        raise ValueError("input vectors must be equal-length 1-D arrays")
    d = xvec.size
    if d > max_dim:
        raise ValueError(f"joint enumeration limited to {max_dim} dimensions")
    lp_rows = np.atleast_2d(log_pmf(mech, xvec))
    lq_rows = np.atleast_2d(log_pmf(mech, xvec_prime))
    b_out = lp_rows.shape[1]
    if b_out**d > MAX_JOINT_OUTCOMES:
        raise ValueError(
            f"joint outcome space {b_out}^{d} exceeds {MAX_JOINT_OUTCOMES}"
        )
    lp_joint = np.zeros(1)
    lq_joint = np.zeros(1)
    for k in range(d):
        lp_joint = (lp_joint[:, None] + lp_rows[k][None, :]).ravel()
        lq_joint = (lq_joint[:, None] + lq_rows[k][None, :]).ravel()
    return _renyi_from_logs(lp_joint, lq_joint, alpha)


def fisher_grid_max(eta1, eta2, x_range: tuple[float, float], n: int) -> float:
    """Dense-grid maximum of the Fisher information over x_range.

    Independent check of the certified supremum; n must be at least 10^4 so
    the grid meaningfully probes the range.
    """
    from .accounting import fisher_info

    if n < 10_000:
        raise ValueError("fisher_grid_max needs at least 10^4 grid points")
    lo, hi = float(x_range[0]), float(x_range[1])
    best = 0.0
    chunk = 1 << 20
    edges = np.linspace(lo, hi, n)
    for start in range(0, n, chunk):
        vals = fisher_info(eta1, eta2, edges[start : start + chunk])
        best = max(best, float(np.max(vals)))
    return best
