"""Discrete distributions over lattices parameterized by a ring of core tensors.

A :class:`CoreSet` holds ``d`` third-order tensors, one per variable. The
``k``-th core has shape ``(N_k, m_k, m_{k+1})``: slicing it at a variable
value yields an ``m_k x m_{k+1}`` matrix, and the unnormalized weight of a
full assignment is the trace of the cyclic product of the selected matrices
(``m_{d+1}`` wraps to ``m_1``). Stored entries are unconstrained; every
computation uses their element-wise absolute values, which keeps weights
non-negative while leaving the parameters free for gradient-based fitting.

Marginalizing a variable replaces its core by the sum of its slices, which
collapses that variable exactly in a single matrix. All probabilities are
normalized on the fly against the fully summed ring.
"""

from __future__ import annotations

from functools import cached_property, reduce
from typing import Mapping, Sequence

import numpy as np

from .chain import chain_logtrace, suffix_products
from .errors import ConditionOnNullError, CoreShapeError, DegenerateDistributionError

# Observed entries of a partial assignment; absent variables are marginalized.
AssignmentMask = Mapping[int, int]


def _as_rng(rng: "int | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class CoreSet:
    """Ordered ring of non-negative core tensors defining a joint distribution.

    Parameters
    ----------
    cores : sequence of array-like
        ``d`` arrays, the ``k``-th of shape ``(N_k, m_k, m_{k+1})`` with the
        last core wrapping back to the first (``m_{d+1} == m_1``). Entries
        must be finite; signs are ignored at use.
    """

    def __init__(self, cores: Sequence[np.ndarray]):
        arrays = tuple(np.array(c, dtype=float) for c in cores)
        if len(arrays) == 0:
            raise CoreShapeError("a core set needs at least one core")
        for k, core in enumerate(arrays):
            if core.ndim != 3:
                raise CoreShapeError(f"core {k} must be 3-D, got shape {core.shape}")
            if min(core.shape) < 1:
                raise CoreShapeError(f"core {k} has an empty axis: {core.shape}")
            if not np.all(np.isfinite(core)):
                raise CoreShapeError(f"core {k} contains non-finite entries")
        for k, core in enumerate(arrays):
            nxt = arrays[(k + 1) % len(arrays)]
            if core.shape[2] != nxt.shape[1]:
                raise CoreShapeError(
                    f"core {k} right size {core.shape[2]} does not match "
                    f"core {(k + 1) % len(arrays)} left size {nxt.shape[1]}"
                )
        for core in arrays:
            core.flags.writeable = False
        self._cores = arrays

    # -- structure ----------------------------------------------------------
    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def category_counts(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self._cores)

    @property
    def core_sizes(self) -> tuple[int, ...]:
        """Left matrix size ``m_k`` of each core (the ring closes the list)."""
        return tuple(c.shape[1] for c in self._cores)

    @cached_property
    def abs_cores(self) -> tuple[np.ndarray, ...]:
        out = tuple(np.abs(c) for c in self._cores)
        for a in out:
            a.flags.writeable = False
        return out

    @cached_property
    def summed_cores(self) -> tuple[np.ndarray, ...]:
        """Per-variable sum of absolute slices, used to marginalize exactly."""
        out = tuple(a.sum(axis=0) for a in self.abs_cores)
        for a in out:
            a.flags.writeable = False
        return out

    @cached_property
    def log_normalizer(self) -> float:
        value = float(chain_logtrace(((m, 0.0) for m in self.summed_cores), 1)[0])
        if not np.isfinite(value):
            raise DegenerateDistributionError(
                "all effective core entries are zero; the ring has no mass"
            )
        return value

    def __repr__(self) -> str:
        return (
            f"CoreSet(d={self.d}, category_counts={self.category_counts}, "
            f"core_sizes={self.core_sizes})"
        )

    # -- validation helpers ---------------------------------------------------
    def _check_mask(self, observed: AssignmentMask, name: str = "mask") -> None:
        counts = self.category_counts
        for k, value in observed.items():
            if not 0 <= int(k) < self.d:
                raise ValueError(f"{name}: variable index {k} out of range for d={self.d}")
            if not 0 <= int(value) < counts[int(k)]:
                raise ValueError(
                    f"{name}: value {value} out of range for variable {k} "
                    f"with {counts[int(k)]} categories"
                )

    # -- weights and probabilities --------------------------------------------
    def unnormalized_weight(self, assignment: Sequence[int]) -> float:
        """Trace of the ring product of the slices selected by ``assignment``."""
        values = [int(v) for v in assignment]
        if len(values) != self.d:
            raise ValueError(f"assignment length {len(values)} != d={self.d}")
        self._check_mask(dict(enumerate(values)), "assignment")
        mats = [a[v] for a, v in zip(self.abs_cores, values)]
        return float(np.trace(reduce(np.matmul, mats)))

    def log_marginal(self, observed: AssignmentMask | None = None) -> float:
        """log p of the observed values with all other variables summed out.

        The empty mask returns exactly 0.0. Raises
        :class:`DegenerateDistributionError` when the ring carries no mass at
        all; an individually impossible observation yields ``-inf``.
        """
        observed = dict(observed or {})
        self._check_mask(observed)
        dims = sorted(observed)
        values = np.array([[observed[k] for k in dims]], dtype=int)
        return float(self.log_marginals(dims, values)[0])

    def log_marginals(self, dims: Sequence[int], values: np.ndarray) -> np.ndarray:
        """Batched :meth:`log_marginal` for many assignments of one mask shape.

        ``dims`` lists the observed variables and ``values`` is an integer
        array of shape ``(n, len(dims))`` giving their values per row.
        """
        dims = [int(k) for k in dims]
        values = np.asarray(values, dtype=int)
        if values.ndim != 2 or values.shape[1] != len(dims):
            raise ValueError("values must have shape (n, len(dims))")
        if len(set(dims)) != len(dims):
            raise ValueError("duplicate dims")
        if values.shape[0] == 0:
            return np.empty(0)
        for pos, k in enumerate(dims):
            self._check_mask({k: int(values[:, pos].min())})
            self._check_mask({k: int(values[:, pos].max())})
        col = {k: pos for pos, k in enumerate(dims)}
        items = []
        for k in range(self.d):
            if k in col:
                items.append((self.abs_cores[k][values[:, col[k]]], 0.0))
            else:
                items.append((self.summed_cores[k], 0.0))
        return chain_logtrace(items, values.shape[0]) - self.log_normalizer

    def log_conditional(self, observed: AssignmentMask, given: AssignmentMask) -> float:
        """log p(observed | given) as a difference of marginals."""
        observed = dict(observed)
        given = dict(given)
        overlap = set(observed) & set(given)
        if overlap:
            raise ValueError(f"observed and given overlap on variables {sorted(overlap)}")
        log_given = self.log_marginal(given)
        if log_given == -np.inf:
            raise ConditionOnNullError("conditioning event has probability zero")
        return self.log_marginal({**observed, **given}) - log_given

    # -- sampling ---------------------------------------------------------------
    def sample(
        self, given: AssignmentMask | None = None, *, rng: "int | np.random.Generator"
    ) -> np.ndarray:
        """Draw one full assignment from p(. | given) by the chain rule."""
        return self.sample_batch(1, given, rng=rng)[0]

    def sample_batch(
        self,
        n: int,
        given: AssignmentMask | None = None,
        *,
        rng: "int | np.random.Generator",
    ) -> np.ndarray:
        """Draw ``n`` assignments; unobserved variables are sampled in ring
        order from their exact one-variable conditionals."""
        gen = _as_rng(rng)
        given = dict(given or {})
        self._check_mask(given, "given")
        if self.log_marginal(given) == -np.inf:
            raise ConditionOnNullError("conditioning event has probability zero")

        fixed_mats = [
            self.abs_cores[k][given[k]] if k in given else self.summed_cores[k]
            for k in range(self.d)
        ]
        suffix = suffix_products(fixed_mats)
        m0 = fixed_mats[0].shape[0]
        buf = np.broadcast_to(np.eye(m0), (n, m0, m0)).copy()
        out = np.empty((n, self.d), dtype=int)
        for k in range(self.d):
            if k in given:
                out[:, k] = given[k]
                buf = np.einsum("nab,bc->nac", buf, fixed_mats[k])
            else:
                core = self.abs_cores[k]
                t = np.einsum("ca,nab->ncb", suffix[k + 1], buf)
                weights = np.einsum("ncb,sbc->ns", t, core)
                totals = weights.sum(axis=1)
                if not np.all(totals > 0.0):
                    raise ConditionOnNullError(
                        "zero conditional mass encountered during sampling"
                    )
                cum = np.cumsum(weights, axis=1)
                u = gen.random(n) * totals
                idx = np.minimum((cum <= u[:, None]).sum(axis=1), core.shape[0] - 1)
                out[:, k] = idx
                buf = np.einsum("nab,nbc->nac", buf, core[idx])
            scale = buf.max(axis=(1, 2))
            buf = buf / np.where(scale > 0.0, scale, 1.0)[:, None, None]
        return out
