"""Generalized entropy index family over agent outcomes.

GE_2 is half the squared coefficient of variation. The index is
subgroup-decomposable: the population value splits exactly into a
within-group and a between-group component, and a group-weighted variant
lets the caller emphasise one group's terms.

Outcomes may be negative (trading losses), which restricts kappa to even
values. All means close to zero are guarded: the affected term is defined
as 0 and the caller can check degeneracy via `mean_is_degenerate`.
"""

from dataclasses import dataclass

import numpy as np

MU_EPS_DEFAULT = 1e-6   # dollars


@dataclass
class GeiConfig:
    kappa: int = 2
    weights: tuple[float, ...] = (0.0, 1.0, 0.0)   # per group; sums to 1
    mu_eps: float = MU_EPS_DEFAULT

    def __post_init__(self):
        if self.kappa % 2 != 0 or self.kappa <= 0:
            raise ValueError("kappa must be a positive even integer")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")


def weights_from_beta(beta: float) -> tuple[float, float, float]:
    """Group weights [beta, 1-beta, 0] over (MM, consumer, other)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return (beta, 1.0 - beta, 0.0)


def mean_is_degenerate(y, mu_eps: float = MU_EPS_DEFAULT) -> bool:
    return abs(float(np.mean(y))) < mu_eps


def ge_index(y, kappa: int = 2, mu_eps: float = MU_EPS_DEFAULT) -> float:
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 1:
        raise ValueError("need at least one outcome")
    mu = y.mean()
    if abs(mu) < mu_eps:
        return 0.0
    return float(np.sum((y / mu) ** kappa - 1.0) / (n * kappa * (kappa - 1)))


def _group_terms(y, groups, kappa, mu_eps):
    """Per-group (within, between) terms of the decomposition.

    Degenerate population mean zeroes everything; a degenerate group mean
    zeroes that group's pair of terms.
    """
    y = np.asarray(y, dtype=float)
    groups = np.asarray(groups)
    n = y.size
    if groups.shape != y.shape:
        raise ValueError("groups must label every outcome")
    labels = np.unique(groups)
    mu = y.mean()
    within = {}
    between = {}
    for g in labels:
        yg = y[groups == g]
        ng = yg.size
        mug = yg.mean()
        if abs(mu) < mu_eps or abs(mug) < mu_eps:
            within[g] = 0.0
            between[g] = 0.0
            continue
        ratio = (mug / mu) ** kappa
        within[g] = (ng / n) * ratio * ge_index(yg, kappa, mu_eps)
        between[g] = ng / (n * kappa * (kappa - 1)) * (ratio - 1.0)
    return within, between


def ge_decomposed(y, groups, kappa: int = 2,
                  mu_eps: float = MU_EPS_DEFAULT) -> tuple[float, float]:
    """(within, between) components; within + between == ge_index(y)."""
    within, between = _group_terms(y, groups, kappa, mu_eps)
    return float(sum(within.values())), float(sum(between.values()))


def ge_weighted(y, groups, weights, kappa: int = 2,
                mu_eps: float = MU_EPS_DEFAULT) -> float:
    """Group-weighted index: sum_g w_g * (within_g + between_g).

    `groups` holds indices into `weights` (0 = MM, 1 = consumer, 2 = other
    in the exchange experiments).
    """
    within, between = _group_terms(y, groups, kappa, mu_eps)
    return float(sum(weights[g] * (within[g] + between[g]) for g in within))


def equitability_step_reward(y_t, y_prev, groups, cfg: GeiConfig) -> float:
    """Change in the negated weighted index from t-1 to t.

    Pass y_prev=None for the first step (index at t=0 defined as 0).
    Summed over an episode these telescope to -GE^w(Y_T).
    """
    ge_t = ge_weighted(y_t, groups, cfg.weights, cfg.kappa, cfg.mu_eps)
    ge_prev = 0.0 if y_prev is None else ge_weighted(
        y_prev, groups, cfg.weights, cfg.kappa, cfg.mu_eps)
    return -ge_t + ge_prev
