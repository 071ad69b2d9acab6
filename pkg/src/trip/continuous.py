"""Continuous distributions: a Gaussian-mixture lattice weighted by a core ring.

Each dimension ``k`` carries ``N_k`` Gaussian components with its own means
and standard deviations; the joint density is a mixture over the full lattice
of per-dimension component choices, whose (unnormalized) weights are the ring
traces of :class:`~trip.cores.CoreSet`. Because the weight tensor never has
to be materialized, marginals, one-dimensional conditionals, and chain-rule
sampling all cost a single pass around the ring.

An observed dimension contributes the matrix
``sum_k |Q[k]| * pdf(z | mean_k, std_k)`` to the ring product; a marginalized
dimension contributes the plain slice sum. Gaussian values are computed in
log space and shifted by their per-dimension maximum before exponentiation,
so observations hundreds of standard deviations from every component still
produce finite log-densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .chain import chain_logtrace, suffix_products
from .cores import CoreSet, _as_rng
from .errors import ConditionOnNullError, CoreShapeError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# Observed entries of a partial continuous assignment; absent = marginalized.
ContinuousMask = Mapping[int, float]


def gaussian_logpdf(z, means, log_stds):
    """Element-wise log N(z | means, exp(log_stds)) with broadcasting.

    Residuals too large for the square map to ``-inf`` rather than warning.
    """
    with np.errstate(over="ignore"):
        t = (np.asarray(z) - means) * np.exp(-log_stds)
        return -0.5 * t * t - log_stds - _LOG_SQRT_2PI


def _component_weights(z_col: np.ndarray, means: np.ndarray, log_stds: np.ndarray):
    """Stabilized per-component likelihoods of a batch of scalars.

    Returns ``(weights, shift)`` with ``weights[i, k] * exp(shift[i])`` equal
    to the true likelihood of ``z_col[i]`` under component ``k``; the shift is
    the row-wise max log-likelihood, so at least one weight is exactly 1. A
    point beyond every component's reach gets zero weights and a ``-inf``
    shift, which the chain walk turns into a ``-inf`` log-density.
    """
    logw = gaussian_logpdf(z_col[:, None], means[None, :], log_stds[None, :])
    shift = logw.max(axis=1)
    safe = np.where(np.isfinite(shift), shift, 0.0)
    return np.exp(logw - safe[:, None]), shift


def observed_matrix(abs_core, z_col, means, log_stds):
    """Ring matrices for an observed dimension, one per batch row.

    Returns ``(mats, shift)``: ``mats[i] * exp(shift[i])`` is the true
    likelihood-weighted slice sum for row ``i``.
    """
    weights, shift = _component_weights(z_col, means, log_stds)
    return np.einsum("kab,ik->iab", abs_core, weights), shift


@dataclass(frozen=True)
class ParamStats:
    """Parameter accounting at 8-byte reals."""

    param_count: int
    memory_bytes: int

    @property
    def memory_mib(self) -> float:
        return self.memory_bytes / 2**20


class TripModel:
    """Gaussian-mixture lattice with ring-weighted modes.

    Parameters
    ----------
    cores : CoreSet or sequence of arrays
        Mode-weight ring; variable ``k`` of the ring selects the component of
        dimension ``k``.
    means, stds : sequences of 1-D arrays
        Per-dimension component means and standard deviations, each of length
        ``N_k``. Standard deviations must be strictly positive and are stored
        internally as logs; pass ``log_stds`` instead of ``stds`` to supply
        the internal parameterization directly (exactly one of the two).
    """

    def __init__(
        self,
        cores: "CoreSet | Sequence[np.ndarray]",
        means: Sequence[np.ndarray],
        stds: Sequence[np.ndarray] | None = None,
        *,
        log_stds: Sequence[np.ndarray] | None = None,
    ):
        self._cores = cores if isinstance(cores, CoreSet) else CoreSet(cores)
        counts = self._cores.category_counts
        if (stds is None) == (log_stds is None):
            raise ValueError("supply exactly one of stds or log_stds")
        scale = stds if stds is not None else log_stds
        if len(means) != self.d or len(scale) != self.d:
            raise CoreShapeError("means/stds must supply one vector per dimension")
        mean_list, log_std_list = [], []
        for k, (mu, sd) in enumerate(zip(means, scale)):
            mu = np.array(mu, dtype=float).reshape(-1)
            sd = np.array(sd, dtype=float).reshape(-1)
            if mu.shape[0] != counts[k] or sd.shape[0] != counts[k]:
                raise CoreShapeError(
                    f"dimension {k}: expected {counts[k]} components, "
                    f"got {mu.shape[0]} means / {sd.shape[0]} stds"
                )
            if not np.all(np.isfinite(mu)):
                raise CoreShapeError(f"dimension {k}: non-finite mean")
            if stds is not None:
                if not (np.all(np.isfinite(sd)) and np.all(sd > 0.0)):
                    raise CoreShapeError(
                        f"dimension {k}: stds must be positive and finite"
                    )
                log_sd = np.log(sd)
            else:
                if not np.all(np.isfinite(sd)):
                    raise CoreShapeError(f"dimension {k}: log-stds must be finite")
                log_sd = sd
            mu.flags.writeable = False
            log_sd.flags.writeable = False
            mean_list.append(mu)
            log_std_list.append(log_sd)
        self._means = tuple(mean_list)
        self._log_stds = tuple(log_std_list)

    # -- structure ----------------------------------------------------------
    @property
    def cores(self) -> CoreSet:
        return self._cores

    @property
    def d(self) -> int:
        return self._cores.d

    @property
    def component_counts(self) -> tuple[int, ...]:
        return self._cores.category_counts

    @property
    def means(self) -> tuple[np.ndarray, ...]:
        return self._means

    @property
    def log_stds(self) -> tuple[np.ndarray, ...]:
        return self._log_stds

    @property
    def stds(self) -> tuple[np.ndarray, ...]:
        return tuple(np.exp(ls) for ls in self._log_stds)

    def __repr__(self) -> str:
        return (
            f"TripModel(d={self.d}, component_counts={self.component_counts}, "
            f"core_sizes={self._cores.core_sizes})"
        )

    def param_stats(self) -> ParamStats:
        """Core entries plus one mean and one std per component."""
        count = sum(int(np.prod(c.shape)) for c in self._cores.cores)
        count += 2 * sum(self.component_counts)
        return ParamStats(param_count=count, memory_bytes=8 * count)

    # -- densities ------------------------------------------------------------
    def _check_mask(self, observed: ContinuousMask) -> dict[int, float]:
        out = {}
        for k, z in observed.items():
            if not 0 <= int(k) < self.d:
                raise ValueError(f"dimension index {k} out of range for d={self.d}")
            z = float(z)
            if not np.isfinite(z):
                raise ValueError(f"observed value for dimension {k} is not finite")
            out[int(k)] = z
        return out

    def log_density(self, observed: ContinuousMask | None = None) -> float:
        """log density of the observed values, marginalized over the rest.

        The empty mask returns exactly 0.0.
        """
        observed = self._check_mask(observed or {})
        dims = sorted(observed)
        values = np.array([[observed[k] for k in dims]], dtype=float)
        return float(self.log_densities(dims, values)[0])

    def log_densities(self, dims: Sequence[int], values: np.ndarray) -> np.ndarray:
        """Batched :meth:`log_density`: ``values`` has shape ``(n, len(dims))``."""
        dims = [int(k) for k in dims]
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(dims):
            raise ValueError("values must have shape (n, len(dims))")
        if len(set(dims)) != len(dims):
            raise ValueError("duplicate dims")
        if values.shape[0] == 0:
            return np.empty(0)
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        col = {k: pos for pos, k in enumerate(dims)}
        if col and not all(0 <= k < self.d for k in col):
            raise ValueError("dimension index out of range")
        items = []
        for k in range(self.d):
            if k in col:
                items.append(
                    observed_matrix(
                        self._cores.abs_cores[k],
                        values[:, col[k]],
                        self._means[k],
                        self._log_stds[k],
                    )
                )
            else:
                items.append((self._cores.summed_cores[k], 0.0))
        return chain_logtrace(items, values.shape[0]) - self._cores.log_normalizer

    # -- conditionals and sampling ---------------------------------------------
    def _fixed_matrix(self, k: int, z: float) -> np.ndarray:
        mats, _ = observed_matrix(
            self._cores.abs_cores[k],
            np.array([z]),
            self._means[k],
            self._log_stds[k],
        )
        return mats[0]

    def _mixture_weights(self, k: int, observed: dict[int, float]) -> np.ndarray:
        """p(component of dimension k | observed values), normalized."""
        mats = [
            self._fixed_matrix(j, observed[j]) if j in observed else self._cores.summed_cores[j]
            for j in range(self.d)
        ]
        prefix = np.eye(self._cores.core_sizes[0])
        for j in range(k):
            prefix = prefix @ mats[j]
            scale = prefix.max()
            if scale > 0.0:
                prefix = prefix / scale
        suffix = np.eye(self._cores.core_sizes[0])
        for j in range(self.d - 1, k, -1):
            suffix = mats[j] @ suffix
            scale = suffix.max()
            if scale > 0.0:
                suffix = suffix / scale
        t = suffix @ prefix
        weights = np.einsum("cb,sbc->s", t, self._cores.abs_cores[k])
        total = weights.sum()
        if not (np.isfinite(total) and total > 0.0):
            raise ConditionOnNullError("conditioning values carry zero mass")
        return weights / total

    def conditional_mixture_weights(self, k: int, prefix: Sequence[float]) -> np.ndarray:
        """Component probabilities of dimension ``k`` given values of 0..k-1."""
        k = int(k)
        if not 0 <= k < self.d:
            raise ValueError(f"dimension index {k} out of range for d={self.d}")
        prefix = [float(z) for z in prefix]
        if len(prefix) != k:
            raise ValueError(f"prefix must cover dimensions 0..{k - 1} exactly")
        observed = self._check_mask(dict(enumerate(prefix)))
        return self._mixture_weights(k, observed)

    def _ancestral_sample(
        self, fixed: dict[int, float], n: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Sample all dimensions not in ``fixed``, in ring order, conditioned
        on ``fixed`` and on previously drawn dimensions."""
        mats = [
            self._fixed_matrix(j, fixed[j]) if j in fixed else self._cores.summed_cores[j]
            for j in range(self.d)
        ]
        suffix = suffix_products(mats)
        m0 = self._cores.core_sizes[0]
        buf = np.broadcast_to(np.eye(m0), (n, m0, m0)).copy()
        out = np.empty((n, self.d))
        for k in range(self.d):
            if k in fixed:
                out[:, k] = fixed[k]
                buf = np.einsum("nab,bc->nac", buf, mats[k])
            else:
                core = self._cores.abs_cores[k]
                t = np.einsum("ca,nab->ncb", suffix[k + 1], buf)
                weights = np.einsum("ncb,sbc->ns", t, core)
                totals = weights.sum(axis=1)
                if not np.all(np.isfinite(totals) & (totals > 0.0)):
                    raise ConditionOnNullError(
                        "zero conditional mass encountered during sampling"
                    )
                cum = np.cumsum(weights, axis=1)
                u = rng.random(n) * totals
                idx = np.minimum((cum <= u[:, None]).sum(axis=1), core.shape[0] - 1)
                z = self._means[k][idx] + np.exp(self._log_stds[k][idx]) * rng.standard_normal(n)
                out[:, k] = z
                step, _ = observed_matrix(core, z, self._means[k], self._log_stds[k])
                buf = np.einsum("nab,nbc->nac", buf, step)
            scale = buf.max(axis=(1, 2))
            buf = buf / np.where(scale > 0.0, scale, 1.0)[:, None, None]
        return out

    def sample(self, *, rng: "int | np.random.Generator") -> np.ndarray:
        """Draw one vector by per-dimension chain-rule sampling."""
        return self._ancestral_sample({}, 1, _as_rng(rng))[0]

    def sample_batch(self, n: int, *, rng: "int | np.random.Generator") -> np.ndarray:
        return self._ancestral_sample({}, int(n), _as_rng(rng))

    def conditional_resample(
        self,
        current: Sequence[float],
        resample_dims: Sequence[int],
        *,
        rng: "int | np.random.Generator",
    ) -> np.ndarray:
        """Redraw the listed dimensions conditioned on all remaining ones.

        Kept dimensions are returned unchanged; resampled dimensions are drawn
        jointly by the chain rule, each conditioned on every kept dimension
        plus the resampled dimensions drawn before it.
        """
        current = np.asarray(current, dtype=float)
        if current.shape != (self.d,):
            raise ValueError(f"current must be a vector of length d={self.d}")
        resample = {int(k) for k in resample_dims}
        if not resample.issubset(range(self.d)):
            raise ValueError("resample_dims out of range")
        if not resample:
            return current.copy()
        fixed = {k: float(current[k]) for k in range(self.d) if k not in resample}
        self._check_mask(fixed)
        return self._ancestral_sample(fixed, 1, _as_rng(rng))[0]
