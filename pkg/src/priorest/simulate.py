"""Sampling, locally unbiased estimators and bootstrap error analysis.

Random numbers come from a Philox generator.  Every stochastic operation
derives its own child stream from the user seed, keyed by the operation
name and (for the bootstrap) the repeat index, so results do not depend on
execution order or the number of worker threads.
"""

import csv
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ModelInconsistencyError, ValidationError
from .fisher import classical_fisher, probabilities

PROB_TOL = 1e-10


@dataclass(frozen=True)
class EstimatorCoefficients:
    coeff: np.ndarray  # n_params x n_outcomes
    offset: np.ndarray

    @classmethod
    def from_povm(cls, povm):
        if povm.estimator is None:
            raise ValidationError("POVM carries no estimator table")
        return cls(np.asarray(povm.estimator, dtype=float), np.asarray(povm.offset, dtype=float))

    def check_unbiased(self, model, povm, tol=1e-9):
        """Largest violation of local unbiasedness on ``model``."""
        p, dp = probabilities(model, povm)
        err_mean = np.abs(self.coeff @ p + self.offset - np.asarray(model.theta)).max()
        err_grad = np.abs(self.coeff @ dp.T - np.eye(len(self.offset))).max()
        return max(err_mean, err_grad)


@dataclass(frozen=True)
class ShotRecord:
    counts: np.ndarray
    shots: int
    seed: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(counts < 0) or counts.sum() != self.shots:
            raise ValidationError("counts must be non-negative and sum to shots")
        object.__setattr__(self, "counts", counts)

    @property
    def frequencies(self):
        return self.counts / self.shots


def _stream(seed, *key):
    """Independent Philox generator for ``(seed, key...)``."""
    words = [zlib.crc32(str(k).encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *words])))


def _checked_probabilities(model, povm):
    p, _ = probabilities(model, povm)
    if np.any(p < -PROB_TOL):
        raise ModelInconsistencyError(f"negative outcome probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample(model, povm, shots, seed):
    """Multinomial outcome counts of ``shots`` measurements of ``povm`` on ``model``."""
    shots = int(shots)
    if shots < 0:
        raise ValidationError("shots must be non-negative")
    p = _checked_probabilities(model, povm)
    counts = _stream(seed, "sample").multinomial(shots, p)
    return ShotRecord(counts, shots, int(seed))


def score_estimator(model, povm):
    """Locally unbiased estimator built from the score: ``theta + F^-1 d log p``.

    Raises
    ------
    ValidationError
        If the classical Fisher information is singular (see
        ``prioritised.check`` for whether the other parameter is learnable).
    """
    p, dp = probabilities(model, povm)
    f = classical_fisher(model, povm)
    if np.linalg.cond(f) > 1e12:
        raise ValidationError("classical Fisher information is singular; check prioritised.check first")
    keep = p > 1e-12
    score = np.zeros_like(dp)
    score[:, keep] = dp[:, keep] / p[keep]
    return EstimatorCoefficients(np.linalg.solve(f, score), np.array(model.theta, dtype=float))


def estimate(coeffs, record):
    """Linear estimates from observed frequencies."""
    counts = np.asarray(record.counts)
    if counts.shape[-1] != coeffs.coeff.shape[1]:
        raise ValidationError(f"{counts.shape[-1]} outcomes for {coeffs.coeff.shape[1]} estimator columns")
    if record.shots <= 0:
        raise ValidationError("cannot estimate from zero shots")
    return coeffs.coeff @ (counts / record.shots) + coeffs.offset


class BootstrapResult(NamedTuple):
    mse: np.ndarray  # mean over repeats, per parameter
    std: np.ndarray  # std over repeats
    per_repeat: np.ndarray  # repeats x n_params


def bootstrap_mse(record, coeffs, resample_shots=200, resamples=10000, repeats=500, seed=0,
                  reference="empirical", theta=None, threads=None):
    """Parametric bootstrap of the mean squared error of runs with ``resample_shots`` shots.

    Each repeat draws ``resamples`` multinomial runs from the empirical
    frequencies and averages the squared deviation of their estimates from
    the reference: the full-record estimate (``"empirical"``) or ``theta``
    (``"true"``).
    """
    if record.shots < resample_shots:
        raise ValidationError(f"record has {record.shots} shots, fewer than resample_shots={resample_shots}")
    freq = record.frequencies
    if reference == "empirical":
        ref = estimate(coeffs, record)
    elif reference == "true":
        if theta is None:
            raise ValidationError("reference='true' needs theta")
        ref = np.asarray(theta, dtype=float)
    else:
        raise ValidationError(f"unknown reference {reference!r}")

    def one(r):
        counts = _stream(seed, "bootstrap", r).multinomial(resample_shots, freq, size=resamples)
        est = (counts / resample_shots) @ coeffs.coeff.T + coeffs.offset
        return np.mean((est - ref) ** 2, axis=0)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per = np.array(list(pool.map(one, range(repeats))))
    else:
        per = np.array([one(r) for r in range(repeats)])
    return BootstrapResult(per.mean(axis=0), per.std(axis=0, ddof=1) if repeats > 1 else np.zeros(per.shape[1]), per)


class BiasScan(NamedTuple):
    truth: np.ndarray  # points x n_params
    estimates: np.ndarray
    std: np.ndarray
    offset: np.ndarray  # fitted "estimated = true + offset", per parameter
    offset_std: np.ndarray


def bias_scan(model_family, povm, coeffs, grid, shots, seed):
    """Estimates at off-design true values with a fixed estimator.

    ``model_family(*theta)`` builds the model at each grid point.  The
    standard error of each estimate follows from the multinomial covariance
    at the observed frequencies; offsets are inverse-variance weighted means
    of ``estimate - true``.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    est, std = [], []
    for k, theta in enumerate(grid):
        model = model_family(*theta)
        p = _checked_probabilities(model, povm)
        counts = _stream(seed, "bias", k).multinomial(int(shots), p)
        rec = ShotRecord(counts, int(shots), int(seed))
        f = rec.frequencies
        est.append(estimate(coeffs, rec))
        var = (coeffs.coeff ** 2) @ f - (coeffs.coeff @ f) ** 2
        std.append(np.sqrt(np.maximum(var, 0.0) / shots))
    est, std = np.array(est), np.array(std)
    w = 1.0 / np.maximum(std, 1e-300) ** 2
    offset = np.sum(w * (est - grid), axis=0) / np.sum(w, axis=0)
    offset_std = 1.0 / np.sqrt(np.sum(w, axis=0))
    return BiasScan(grid, est, std, offset, offset_std)


def write_bias_csv(scan, labels, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f"true_{l}" for l in labels] + [f"est_{l}" for l in labels] + [f"std_{l}" for l in labels])
        for t, e, s in zip(scan.truth, scan.estimates, scan.std):
            out.writerow([format(v, ".17g") for v in (*t, *e, *s)])
