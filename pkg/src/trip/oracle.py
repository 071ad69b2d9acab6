"""Brute-force reference implementations.

Everything here evaluates distributions by exhaustive enumeration, entry by
entry, sharing no code with the ring-walk implementations it cross-checks.
Size caps keep the exponential cost honest; the CLI exposes these checks for
small models through its verify command.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .continuous import TripModel
from .cores import CoreSet
from .errors import DegenerateDistributionError, OracleSizeError

DENSE_CAP = 1_000_000


@dataclass(frozen=True)
class DenseJoint:
    """Fully materialized, normalized probability tensor."""

    probs: np.ndarray


def densify(cores: CoreSet, cap: int = DENSE_CAP) -> DenseJoint:
    """Evaluate the ring weight at every index and normalize."""
    counts = cores.category_counts
    total_entries = int(np.prod(counts))
    if total_entries > cap:
        raise OracleSizeError(f"{total_entries} entries exceed the cap of {cap}")
    out = np.empty(counts)
    slices = [np.abs(np.asarray(c)) for c in cores.cores]
    for idx in np.ndindex(*counts):
        mat = slices[0][idx[0]]
        for k in range(1, len(counts)):
            mat = mat @ slices[k][idx[k]]
        out[idx] = np.trace(mat)
    total = out.sum()
    if not total > 0:
        raise DegenerateDistributionError("dense tensor has no mass")
    return DenseJoint(out / total)


def dense_marginal(dense: DenseJoint, observed: Mapping[int, int]) -> float:
    """Marginal probability of the observed values by exhaustive summation."""
    d = dense.probs.ndim
    marg_axes = tuple(k for k in range(d) if k not in observed)
    summed = dense.probs.sum(axis=marg_axes) if marg_axes else dense.probs
    kept = sorted(k for k in range(d) if k in observed)
    return float(summed[tuple(observed[k] for k in kept)])


def enumerate_modes(
    model: TripModel, cap: int = DENSE_CAP
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All lattice modes of a continuous model.

    Returns ``(weights, means, stds)`` with shapes ``(K,)``, ``(K, d)``,
    ``(K, d)`` where ``K`` is the product of the component counts.
    """
    dense = densify(model.cores, cap)
    counts = model.component_counts
    weights = dense.probs.reshape(-1)
    idx = np.array(list(np.ndindex(*counts)), dtype=int)
    means = np.empty((idx.shape[0], model.d))
    stds = np.empty((idx.shape[0], model.d))
    for j in range(model.d):
        means[:, j] = np.asarray(model.means[j])[idx[:, j]]
        stds[:, j] = np.asarray(model.stds[j])[idx[:, j]]
    return weights, means, stds


def _mode_pdfs(
    weights: np.ndarray,
    means: np.ndarray,
    stds: np.ndarray,
    observed: Mapping[int, float],
) -> np.ndarray:
    vals = weights.copy()
    for j, z in observed.items():
        t = (float(z) - means[:, j]) / stds[:, j]
        vals = vals * np.exp(-0.5 * t * t) / (stds[:, j] * np.sqrt(2.0 * np.pi))
    return vals


def dense_density(
    model: TripModel, observed: Mapping[int, float], cap: int = DENSE_CAP
) -> float:
    """Marginal density of the observed coordinates by summing over all modes.

    Marginalized dimensions integrate out of each Gaussian factor exactly, so
    they simply drop from the product.
    """
    weights, means, stds = enumerate_modes(model, cap)
    return float(_mode_pdfs(weights, means, stds, observed).sum())


def dense_mixture_weights(
    model: TripModel, k: int, observed: Mapping[int, float], cap: int = DENSE_CAP
) -> np.ndarray:
    """p(component of dimension k | observed values) by mode enumeration.

    ``observed`` must not contain ``k`` itself.
    """
    weights, means, stds = enumerate_modes(model, cap)
    counts = model.component_counts
    idx = np.array(list(np.ndindex(*counts)), dtype=int)
    vals = _mode_pdfs(weights, means, stds, observed)
    out = np.array([vals[idx[:, k] == s].sum() for s in range(counts[k])])
    return out / out.sum()


def numeric_grad(
    f: Callable[[np.ndarray], float], x: Sequence[float], h: float = 1e-5
) -> np.ndarray:
    """Central finite differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        hi = np.zeros_like(x)
        hi[i] = h
        out[i] = (f(x + hi) - f(x - hi)) / (2.0 * h)
    return out
