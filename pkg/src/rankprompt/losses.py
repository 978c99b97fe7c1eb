"""Training objective over calibrated similarity matrices.

Two ingredients: a bidirectional KL alignment loss (image rows against
one-hot targets plus class columns against normalized batch presence) and
a pairwise rank loss that pushes each row to decay strictly away from its
true class in both directions.  Every term comes with a hand-derived
analytic gradient with respect to the similarity matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from .core import InputError, LabelVector, SimilarityMatrix, _log_softmax, one_hot

DIRECTIONS = ("rightward", "leftward")


@dataclass(frozen=True)
class LossConfig:
    tau: float = 1.0
    lambda_rank: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        if self.lambda_rank < 0:
            raise InputError(f"lambda_rank must be nonnegative, got {self.lambda_rank}")


@dataclass(frozen=True)
class LossReport:
    main: float
    rank: float
    total: float
    grad_similarity: np.ndarray


def _check_pair(s: SimilarityMatrix, labels: LabelVector) -> None:
    if len(labels) != s.m:
        raise InputError(f"got {len(labels)} labels for {s.m} similarity rows")
    labels.validate_for(s.k)


def text_to_image_loss(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> float:
    """Mean KL(one-hot || row-softmax), i.e. mean cross-entropy of the true class."""
    _check_pair(s_cal, labels)
    logp = _log_softmax(s_cal.data / cfg.tau)
    return float(-np.mean(logp[np.arange(s_cal.m), labels.labels]))


def grad_text_to_image(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> np.ndarray:
    _check_pair(s_cal, labels)
    p = np.exp(_log_softmax(s_cal.data / cfg.tau))
    return (p - one_hot(labels, s_cal.k)) / (s_cal.m * cfg.tau)


def _present_classes(labels: LabelVector, k: int) -> np.ndarray:
    return np.flatnonzero(np.bincount(labels.labels, minlength=k) > 0)


def image_to_text_loss(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> float:
    """Transposed direction: KL of normalized class presence against the
    softmax of each class column over the batch, averaged over the classes
    actually present in the batch (absent classes carry no target mass).
    """
    _check_pair(s_cal, labels)
    present = _present_classes(labels, s_cal.k)
    y = one_hot(labels, s_cal.k).T[present]
    y = y / y.sum(axis=1, keepdims=True)
    logq = _log_softmax(s_cal.data.T[present] / cfg.tau)
    kl = xlogy(y, y).sum(axis=1) - (y * logq).sum(axis=1)
    return float(np.mean(kl))


def grad_image_to_text(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> np.ndarray:
    _check_pair(s_cal, labels)
    present = _present_classes(labels, s_cal.k)
    y = one_hot(labels, s_cal.k).T[present]
    y = y / y.sum(axis=1, keepdims=True)
    q = np.exp(_log_softmax(s_cal.data.T[present] / cfg.tau))
    g = np.zeros_like(s_cal.data)
    g[:, present] = ((q - y) / (len(present) * cfg.tau)).T
    return g


def main_loss(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> float:
    """Arithmetic mean of the two directional KL losses."""
    return 0.5 * (image_to_text_loss(s_cal, labels, cfg) + text_to_image_loss(s_cal, labels, cfg))


def grad_main(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> np.ndarray:
    return 0.5 * (grad_image_to_text(s_cal, labels, cfg) + grad_text_to_image(s_cal, labels, cfg))


def rank_directional_loss(row, true_class: int, direction: str, tau: float) -> float:
    """Sum of -ln(logistic(gap/tau)) over the neighbor pairs on one side.

    rightward walks pairs (j, j+1) from the true class up to the end and
    wants row[j] > row[j+1]; leftward walks pairs (j, j-1) down from the
    true class and wants row[j] > row[j-1].  Boundary classes give empty
    sums (0).
    """
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise InputError(f"row must be 1-D, got shape {row.shape}")
    if direction not in DIRECTIONS:
        raise InputError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if not tau > 0:
        raise InputError(f"tau must be positive, got {tau}")
    k = row.size
    if not 0 <= true_class < k:
        raise InputError(f"true_class {true_class} out of range for {k} classes")
    if direction == "rightward":
        gaps = row[true_class : k - 1] - row[true_class + 1 : k]
    else:
        gaps = row[1 : true_class + 1] - row[0:true_class]
    # -ln(sigmoid(z)) computed stably as ln(1 + exp(-z))
    return float(np.logaddexp(0.0, -gaps / tau).sum())


def _pair_signs(labels: LabelVector, k: int) -> np.ndarray:
    """Sign of the wanted gap for each adjacent column pair (a, a+1).

    Pairs at or right of the true class want s[a] > s[a+1] (+1); pairs left
    of it want s[a] < s[a+1] (-1).  Together they tile both directional
    chains exactly once.
    """
    a = np.arange(k - 1)[None, :]
    return np.where(a >= labels.labels[:, None], 1.0, -1.0)


def rank_loss(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> float:
    """Mean over samples of the summed rightward and leftward losses."""
    _check_pair(s_cal, labels)
    d = s_cal.data[:, :-1] - s_cal.data[:, 1:]
    sign = _pair_signs(labels, s_cal.k)
    return float(np.logaddexp(0.0, -sign * d / cfg.tau).sum() / s_cal.m)


def grad_rank(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> np.ndarray:
    _check_pair(s_cal, labels)
    d = s_cal.data[:, :-1] - s_cal.data[:, 1:]
    sign = _pair_signs(labels, s_cal.k)
    # d/dz of -ln(sigmoid(z)) is sigmoid(z) - 1, chained through z = sign*gap/tau
    dz = (expit(sign * d / cfg.tau) - 1.0) * sign / (cfg.tau * s_cal.m)
    g = np.zeros_like(s_cal.data)
    g[:, :-1] += dz
    g[:, 1:] -= dz
    return g


def grad_total_wrt_similarity(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> np.ndarray:
    """Analytic gradient of main + lambda_rank * rank for every entry."""
    g = grad_main(s_cal, labels, cfg)
    if cfg.lambda_rank != 0.0:
        g = g + cfg.lambda_rank * grad_rank(s_cal, labels, cfg)
    return g


def total_loss(s_cal: SimilarityMatrix, labels: LabelVector, cfg: LossConfig) -> LossReport:
    main = main_loss(s_cal, labels, cfg)
    rank = rank_loss(s_cal, labels, cfg)
    return LossReport(
        main=main,
        rank=rank,
        total=main + cfg.lambda_rank * rank,
        grad_similarity=grad_total_wrt_similarity(s_cal, labels, cfg),
    )
