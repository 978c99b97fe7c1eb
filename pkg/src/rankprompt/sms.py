"""Similarity-row calibration from kernel-smoothed per-class statistics.

Per-class mean/variance of raw similarity rows are accumulated while an
epoch runs, smoothed across neighboring classes with a Gaussian kernel
over class-index distance, committed (frozen) at the epoch boundary, and
applied as a per-row affine map throughout the following epoch.  Before
the first commit calibration is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import InputError, LabelVector, SimilarityMatrix, StateError

# Variance floor: a single-sample class must still yield a usable scale.
VAR_FLOOR = 1e-6

CALIBRATION_VARIANTS = ("standard", "literal")


class CalibrationDisabled(Exception):
    """Too few classes observed this epoch to smooth across."""


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian weights over class-index distance |j - j'|."""

    sigma: float = 1.0
    include_self: bool = False
    normalize: bool = True
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise InputError(f"unsupported kernel kind {self.kind!r}")
        if not self.sigma > 0:
            raise InputError(f"kernel sigma must be positive, got {self.sigma}")


def kernel_weights(spec: KernelSpec, j: int, k: int) -> np.ndarray:
    """Weight vector over k classes for smoothing class j's statistics.

    Raw weights are exp(-(j-j')^2 / (2 sigma^2)) with the self weight
    zeroed unless ``include_self``; if ``normalize`` they are rescaled to
    sum to 1 (left untouched when everything underflowed to zero).
    """
    if k < 2:
        raise InputError(f"need at least 2 classes to smooth over, got {k}")
    if not 0 <= j < k:
        raise InputError(f"class index {j} out of range for {k} classes")
    d = np.arange(k, dtype=np.float64) - float(j)
    w = np.exp(-(d * d) / (2.0 * spec.sigma**2))
    if not spec.include_self:
        w[j] = 0.0
    if spec.normalize:
        total = w.sum()
        if total > 0.0:
            w = w / total
    return w


@dataclass(frozen=True)
class ClassStats:
    """Per-class similarity-row statistics with an epoch-commit lifecycle.

    The ``epoch_*`` arrays accumulate the running epoch; ``commit_epoch``
    freezes their mean/variance plus smoothed versions into the
    ``frozen_*`` / ``smoothed_*`` fields and resets the accumulators.
    Calibration only ever reads the frozen side.
    """

    k: int
    dim: int
    kernel: KernelSpec
    epoch_sum: np.ndarray
    epoch_sumsq: np.ndarray
    epoch_count: np.ndarray
    committed: bool = False
    calibration_active: bool = False
    frozen_mean: np.ndarray | None = None
    frozen_var: np.ndarray | None = None
    frozen_count: np.ndarray | None = None
    smoothed_mean: np.ndarray | None = None
    smoothed_var: np.ndarray | None = None

    @property
    def count(self) -> np.ndarray:
        return self.epoch_count

    @property
    def mean(self) -> np.ndarray:
        """Running per-class means; NaN where a class has no samples yet."""
        out = np.full((self.k, self.dim), np.nan)
        seen = self.epoch_count > 0
        out[seen] = self.epoch_sum[seen] / self.epoch_count[seen, None]
        return out

    @property
    def var(self) -> np.ndarray:
        """Running per-class population variances, floored at VAR_FLOOR."""
        out = np.full((self.k, self.dim), np.nan)
        seen = self.epoch_count > 0
        n = self.epoch_count[seen, None].astype(np.float64)
        m = self.epoch_sum[seen] / n
        out[seen] = np.maximum(self.epoch_sumsq[seen] / n - m * m, VAR_FLOOR)
        return out


def init_class_stats(k: int, kernel: KernelSpec | None = None, dim: int | None = None) -> ClassStats:
    """Pristine statistics: nothing accumulated, nothing committed."""
    if k < 2:
        raise InputError(f"need at least 2 classes, got {k}")
    dim = k if dim is None else dim
    if dim < 1:
        raise InputError(f"similarity-row length must be >= 1, got {dim}")
    return ClassStats(
        k=k,
        dim=dim,
        kernel=kernel if kernel is not None else KernelSpec(),
        epoch_sum=np.zeros((k, dim)),
        epoch_sumsq=np.zeros((k, dim)),
        epoch_count=np.zeros(k, dtype=np.int64),
    )


def accumulate_class_stats(stats: ClassStats, s: SimilarityMatrix, labels: LabelVector) -> ClassStats:
    """Fold a batch of raw similarity rows into the running epoch sums."""
    if s.k != stats.dim:
        raise InputError(f"similarity width {s.k} does not match statistics dim {stats.dim}")
    if len(labels) != s.m:
        raise InputError(f"got {len(labels)} labels for {s.m} similarity rows")
    labels.validate_for(stats.k)
    total = stats.epoch_sum.copy()
    totalsq = stats.epoch_sumsq.copy()
    n = stats.epoch_count.copy()
    np.add.at(total, labels.labels, s.data)
    np.add.at(totalsq, labels.labels, s.data * s.data)
    np.add.at(n, labels.labels, 1)
    return replace(stats, epoch_sum=total, epoch_sumsq=totalsq, epoch_count=n)


def smooth_stats(stats: ClassStats, spec: KernelSpec | None = None) -> ClassStats:
    """Fill smoothed_mean / smoothed_var from the running epoch statistics.

    Classes never observed this epoch are excluded from every weighted sum
    and the kernel weights are renormalized over the observed ones.

    Raises CalibrationDisabled when fewer than 2 classes were observed.
    """
    spec = stats.kernel if spec is None else spec
    observed = stats.epoch_count > 0
    if int(observed.sum()) < 2:
        raise CalibrationDisabled(f"only {int(observed.sum())} classes observed, need at least 2")
    mean = stats.mean
    var = stats.var
    sm = np.full((stats.k, stats.dim), np.nan)
    sv = np.full((stats.k, stats.dim), np.nan)
    raw_spec = replace(spec, normalize=False)
    for j in np.flatnonzero(observed):
        w = kernel_weights(raw_spec, int(j), stats.k)
        w = np.where(observed, w, 0.0)
        total = w.sum()
        if total <= 0.0:
            # every candidate neighbor underflowed; keep the raw statistics
            sm[j] = mean[j]
            sv[j] = var[j]
            continue
        if spec.normalize:
            w = w / total
        sm[j] = w[observed] @ mean[observed]
        sv[j] = w[observed] @ var[observed]
    return replace(stats, smoothed_mean=sm, smoothed_var=sv)


def commit_epoch(stats: ClassStats) -> ClassStats:
    """Freeze the epoch's statistics for use throughout the next epoch.

    No-op when nothing was accumulated.  When fewer than two classes were
    seen the commit still happens but calibration is switched off until a
    richer epoch commits.
    """
    if int(stats.epoch_count.sum()) == 0:
        return stats
    try:
        smoothed = smooth_stats(stats)
        sm, sv, active = smoothed.smoothed_mean, smoothed.smoothed_var, True
    except CalibrationDisabled:
        sm, sv, active = None, None, False
    return replace(
        stats,
        epoch_sum=np.zeros_like(stats.epoch_sum),
        epoch_sumsq=np.zeros_like(stats.epoch_sumsq),
        epoch_count=np.zeros_like(stats.epoch_count),
        committed=True,
        calibration_active=active,
        frozen_mean=stats.mean,
        frozen_var=stats.var,
        frozen_count=stats.epoch_count.copy(),
        smoothed_mean=sm,
        smoothed_var=sv,
    )


def _row_affine(stats: ClassStats, labels: LabelVector, m: int, variant: str):
    """Per-row (scale, offset) of the frozen calibration map s -> scale*s + offset.

    Rows of classes that lack committed statistics get scale 1, offset 0.
    """
    if variant not in CALIBRATION_VARIANTS:
        raise InputError(f"unknown calibration variant {variant!r}")
    scale = np.ones((m, stats.dim))
    offset = np.zeros((m, stats.dim))
    if not (stats.committed and stats.calibration_active):
        return scale, offset
    lab = labels.labels
    usable = (stats.frozen_count > 0)[lab]
    if np.any(usable):
        j = lab[usable]
        mu = stats.frozen_mean[j]
        smu = stats.smoothed_mean[j]
        svar = stats.smoothed_var[j]
        if variant == "standard":
            sc = np.sqrt(svar) / np.sqrt(stats.frozen_var[j])
        else:
            sc = np.sqrt(svar) * np.sqrt(np.abs(smu))
        scale[usable] = sc
        offset[usable] = smu - sc * mu
    return scale, offset


def calibrate_rows(
    s: SimilarityMatrix, labels: LabelVector, stats: ClassStats, variant: str = "standard"
) -> SimilarityMatrix:
    """Affine-map each row toward the smoothed statistics of its true class.

    standard: out = sqrt(smoothed_var/var) * (s - mean) + smoothed_mean
    literal:  out = sqrt(smoothed_var) * sqrt(|smoothed_mean|) * (s - mean) + smoothed_mean

    with mean/var/smoothed_* the frozen per-class statistics of the row's
    true class.  Before any commit the map is the identity (cold start);
    rows of classes without committed statistics pass through unchanged.
    Statistics holding uncommitted accumulation are rejected: calibration
    must only ever see values frozen at an epoch boundary.
    """
    if s.k != stats.dim:
        raise InputError(f"similarity width {s.k} does not match statistics dim {stats.dim}")
    if len(labels) != s.m:
        raise InputError(f"got {len(labels)} labels for {s.m} similarity rows")
    labels.validate_for(stats.k)
    if not stats.committed and int(stats.epoch_count.sum()) > 0:
        raise StateError("statistics were accumulated but never committed; call commit_epoch first")
    scale, offset = _row_affine(stats, labels, s.m, variant)
    return SimilarityMatrix(scale * s.data + offset, calibrated=True)


def calibration_scale(stats: ClassStats, labels: LabelVector, m: int, variant: str = "standard") -> np.ndarray:
    """d(calibrated)/d(raw) per entry: the scale part of the frozen affine map."""
    scale, _ = _row_affine(stats, labels, m, variant)
    return scale


def stats_to_dict(stats: ClassStats) -> dict:
    """JSON-ready snapshot of the committed side (accumulators are not kept)."""

    def per_class(arr):
        if arr is None:
            return None
        return [None if stats.frozen_count[j] == 0 else arr[j].tolist() for j in range(stats.k)]

    return {
        "k": stats.k,
        "dim": stats.dim,
        "kernel": {
            "kind": stats.kernel.kind,
            "sigma": stats.kernel.sigma,
            "include_self": stats.kernel.include_self,
            "normalize": stats.kernel.normalize,
        },
        "committed": stats.committed,
        "calibration_active": stats.calibration_active,
        "count": None if stats.frozen_count is None else stats.frozen_count.tolist(),
        "mean": per_class(stats.frozen_mean),
        "var": per_class(stats.frozen_var),
        "smoothed_mean": per_class(stats.smoothed_mean),
        "smoothed_var": per_class(stats.smoothed_var),
    }


def stats_from_dict(d: dict) -> ClassStats:
    """Rebuild committed statistics; the loaded object starts a fresh epoch."""
    k = int(d["k"])
    dim = int(d["dim"])
    kern = d["kernel"]
    stats = init_class_stats(
        k,
        KernelSpec(
            sigma=float(kern["sigma"]),
            include_self=bool(kern["include_self"]),
            normalize=bool(kern["normalize"]),
            kind=kern["kind"],
        ),
        dim=dim,
    )

    def from_per_class(rows):
        if rows is None:
            return None
        out = np.full((k, dim), np.nan)
        for j, row in enumerate(rows):
            if row is not None:
                out[j] = np.asarray(row, dtype=np.float64)
        return out

    return replace(
        stats,
        committed=bool(d["committed"]),
        calibration_active=bool(d["calibration_active"]),
        frozen_count=None if d["count"] is None else np.asarray(d["count"], dtype=np.int64),
        frozen_mean=from_per_class(d["mean"]),
        frozen_var=from_per_class(d["var"]),
        smoothed_mean=from_per_class(d["smoothed_mean"]),
        smoothed_var=from_per_class(d["smoothed_var"]),
    )
