"""Moment estimation and the affine map to isotropic position."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .samplers import SampleBatch

EIG_FLOOR = 1e-10
_BLOCK = 16_384


class DegenerateSupportError(ValueError):
    """Covariance has an eigenvalue below the floor: the sample lives on a lower-dimensional set."""


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x ↦ linear @ x + shift``."""

    linear: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        a = np.array(self.linear, dtype=float, ndmin=2)
        b = np.array(self.shift, dtype=float, ndmin=1)
        if a.shape != (b.shape[0], b.shape[0]):
            raise ValueError(f"linear part {a.shape} does not match shift {b.shape}")
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "shift", b)

    @property
    def dim(self) -> int:
        return self.shift.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.linear))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.linear.T + self.shift

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.shift)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """``self ∘ inner``."""
        return AffineMap(self.linear @ inner.linear, self.linear @ inner.shift + self.shift)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.linear, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.shift, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"type": "affine", "linear": self.linear.tolist(), "shift": self.shift.tolist()}

    @classmethod
    def from_dict(cls, spec: dict) -> "AffineMap":
        if spec.get("type") != "affine":
            raise ValueError(f"not an affine map description: {spec.get('type')!r}")
        return cls(np.asarray(spec["linear"]), np.asarray(spec["shift"]))

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.eye(n), np.zeros(n))


def _rows(batch) -> np.ndarray:
    return batch.data if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def empirical_moments(batch) -> MomentEstimate:
    """Sample mean and the 1/m-normalized central second moment matrix.

    Both passes accumulate over fixed row blocks in order, so the result does
    not depend on how the batch was produced.
    """
    x = _rows(batch)
    m, n = x.shape
    if m < n + 1:
        raise ValueError(f"need at least n+1 = {n + 1} rows to estimate moments, got {m}")
    total = np.zeros(n)
    for lo in range(0, m, _BLOCK):
        total += x[lo:lo + _BLOCK].sum(axis=0)
    mean = total / m
    cov = np.zeros((n, n))
    for lo in range(0, m, _BLOCK):
        c = x[lo:lo + _BLOCK] - mean
        cov += c.T @ c
    cov /= m
    cov = 0.5 * (cov + cov.T)
    return MomentEstimate(mean, cov, m)


def inverse_sqrt(cov: np.ndarray, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] < eig_floor:
        raise DegenerateSupportError(
            f"covariance eigenvalue {evals[0]:.3g} is below the floor {eig_floor:g}; support is degenerate"
        )
    return (evecs / np.sqrt(evals)) @ evecs.T


def whitening_map(mom: MomentEstimate, eig_floor: float = EIG_FLOOR) -> AffineMap:
    """``x ↦ Σ^{-1/2}(x - μ)`` with the symmetric inverse square root (rotation-equivariant)."""
    w = inverse_sqrt(mom.covariance, eig_floor)
    return AffineMap(w, -w @ mom.mean)


def apply_affine(batch: SampleBatch, amap: AffineMap) -> SampleBatch:
    if batch.n != amap.dim:
        raise ValueError(f"map acts on dimension {amap.dim}, batch has {batch.n}")
    return batch.with_data(amap(batch.data), f"affine:{amap.fingerprint()}")


def whiten(batch: SampleBatch, eig_floor: float = EIG_FLOOR) -> tuple[SampleBatch, AffineMap]:
    amap = whitening_map(empirical_moments(batch), eig_floor)
    return apply_affine(batch, amap), amap


@dataclass(frozen=True)
class IsotropyReport:
    max_abs_mean: float
    max_cov_dev: float
    min_eig: float
    max_eig: float
    m: int
    n: int

    @property
    def default_tolerance(self) -> float:
        return 5.0 * math.sqrt(self.n / self.m)

    def passes(self, tol: float | None = None) -> bool:
        tol = self.default_tolerance if tol is None else tol
        return self.max_abs_mean <= tol and self.max_cov_dev <= tol

    def to_dict(self) -> dict:
        return {
            "max_abs_mean": self.max_abs_mean,
            "max_cov_dev": self.max_cov_dev,
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
            "m": self.m,
            "n": self.n,
            "tolerance": self.default_tolerance,
            "passed": self.passes(),
        }


def isotropy_report(batch) -> IsotropyReport:
    mom = empirical_moments(batch)
    evals = np.linalg.eigvalsh(mom.covariance)
    return IsotropyReport(
        float(np.max(np.abs(mom.mean))),
        float(np.max(np.abs(mom.covariance - np.eye(mom.dim)))),
        float(evals[0]),
        float(evals[-1]),
        mom.sample_count,
        mom.dim,
    )
