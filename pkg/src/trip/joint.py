"""Joint model over continuous latents and discrete attributes in one ring.

Attributes live in the same core ring as the latent dimensions, interleaved
by a permutation (rings capture dependence between close neighbors better
than between distant ones, so the interleaving matters for expressiveness,
not for correctness). Missing attributes are never imputed: they are
marginalized exactly by summing their core slices, both when evaluating the
joint density and when sampling.
"""

from __future__ import annotations

from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .chain import chain_logtrace, suffix_products
from .continuous import ContinuousMask, TripModel, observed_matrix
from .cores import _as_rng
from .errors import ConditionOnNullError, CoreShapeError, DegenerateDistributionError

# Observed attribute values; absent attributes are missing (marginalized).
PartialAttributes = Mapping[int, int]


def make_permutation(d: int, c: int, seed: "int | np.random.Generator") -> np.ndarray:
    """Uniformly random ring order of ``d`` latent and ``c`` attribute variables.

    Entries ``0..d-1`` are latent dimensions, ``d..d+c-1`` attributes; the
    array lists variable ids by ring position. Deterministic under the seed.
    """
    if d < 0 or c < 0:
        raise ValueError("d and c must be non-negative")
    return _as_rng(seed).permutation(d + c)


class JointModel:
    """A :class:`TripModel` extended with discrete attribute variables.

    Parameters
    ----------
    trip : TripModel
        Model over the ``d`` latent dimensions.
    attribute_cores : sequence of arrays
        One core of shape ``(C_i, m, m')`` per attribute; cardinalities may
        differ from the latent component counts.
    permutation : sequence of int
        Ring order over all ``d + c`` variables (latents ``0..d-1``,
        attributes ``d..d+c-1``). Core shapes must chain compatibly in this
        order, wrapping around.
    attribute_names : sequence of str, optional
        Defaults to ``attr0, attr1, ...``.
    """

    def __init__(
        self,
        trip: TripModel,
        attribute_cores: Sequence[np.ndarray],
        permutation: Sequence[int],
        attribute_names: Sequence[str] | None = None,
    ):
        self._trip = trip
        attrs = tuple(np.array(a, dtype=float) for a in attribute_cores)
        for i, core in enumerate(attrs):
            if core.ndim != 3 or min(core.shape) < 1:
                raise CoreShapeError(f"attribute core {i} must be 3-D, got {core.shape}")
            if not np.all(np.isfinite(core)):
                raise CoreShapeError(f"attribute core {i} contains non-finite entries")
            core.flags.writeable = False
        self._attr_cores = attrs

        perm = np.asarray(permutation, dtype=int)
        total = trip.d + len(attrs)
        if sorted(perm.tolist()) != list(range(total)):
            raise ValueError(f"permutation must be a bijection on 0..{total - 1}")
        self._perm = perm
        self._perm.flags.writeable = False

        ring = [self._core_of(v) for v in perm]
        for p, core in enumerate(ring):
            nxt = ring[(p + 1) % len(ring)]
            if core.shape[2] != nxt.shape[1]:
                raise CoreShapeError(
                    f"ring position {p} (variable {perm[p]}) right size "
                    f"{core.shape[2]} does not match position {(p + 1) % len(ring)}"
                )

        if attribute_names is None:
            attribute_names = [f"attr{i}" for i in range(len(attrs))]
        if len(attribute_names) != len(attrs):
            raise ValueError("one name per attribute required")
        self._attr_names = tuple(str(s) for s in attribute_names)

    # -- structure ----------------------------------------------------------
    @property
    def trip(self) -> TripModel:
        return self._trip

    @property
    def attribute_cores(self) -> tuple[np.ndarray, ...]:
        return self._attr_cores

    @property
    def permutation(self) -> np.ndarray:
        return self._perm

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return self._attr_names

    @property
    def d(self) -> int:
        return self._trip.d

    @property
    def c(self) -> int:
        return len(self._attr_cores)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self._attr_cores)

    def _core_of(self, v: int) -> np.ndarray:
        if v < self.d:
            return self._trip.cores.cores[v]
        return self._attr_cores[v - self.d]

    @cached_property
    def _abs_attr_cores(self) -> tuple[np.ndarray, ...]:
        return tuple(np.abs(a) for a in self._attr_cores)

    @cached_property
    def _summed_ring(self) -> list[np.ndarray]:
        out = []
        for v in self._perm:
            if v < self.d:
                out.append(self._trip.cores.summed_cores[v])
            else:
                out.append(self._abs_attr_cores[v - self.d].sum(axis=0))
        return out

    @cached_property
    def log_normalizer(self) -> float:
        value = float(chain_logtrace(((m, 0.0) for m in self._summed_ring), 1)[0])
        if not np.isfinite(value):
            raise DegenerateDistributionError(
                "all effective core entries are zero; the ring has no mass"
            )
        return value

    def __repr__(self) -> str:
        return (
            f"JointModel(d={self.d}, c={self.c}, "
            f"cardinalities={self.cardinalities}, permutation={self._perm.tolist()})"
        )

    # -- validation ------------------------------------------------------------
    def _check_attrs(self, attrs: PartialAttributes) -> dict[int, int]:
        cards = self.cardinalities
        out = {}
        for i, value in attrs.items():
            i, value = int(i), int(value)
            if not 0 <= i < self.c:
                raise ValueError(f"attribute index {i} out of range for c={self.c}")
            if not 0 <= value < cards[i]:
                raise ValueError(
                    f"attribute {i} value {value} out of range (cardinality {cards[i]})"
                )
            out[i] = value
        return out

    # -- evaluation --------------------------------------------------------------
    def log_joint(
        self,
        z_observed: ContinuousMask | None = None,
        attrs: PartialAttributes | None = None,
    ) -> float:
        """Normalized log p of observed latents and attributes, everything
        else marginalized. The empty call returns exactly 0.0."""
        z_observed = self._trip._check_mask(z_observed or {})
        attrs = self._check_attrs(attrs or {})
        z_dims = sorted(z_observed)
        z_values = np.array([[z_observed[k] for k in z_dims]], dtype=float)
        attr_values = np.full((1, self.c), -1, dtype=int)
        for i, v in attrs.items():
            attr_values[0, i] = v
        return float(self.log_joints(z_dims, z_values, attr_values)[0])

    def log_joints(
        self,
        latent_dims: Sequence[int],
        z_values: np.ndarray,
        attr_values: np.ndarray,
    ) -> np.ndarray:
        """Batched :meth:`log_joint`. ``attr_values`` is ``(n, c)`` with ``-1``
        marking missing entries; ``z_values`` is ``(n, len(latent_dims))``."""
        latent_dims = [int(k) for k in latent_dims]
        z_values = np.asarray(z_values, dtype=float)
        attr_values = np.asarray(attr_values, dtype=int)
        n = z_values.shape[0] if z_values.ndim == 2 else attr_values.shape[0]
        if z_values.ndim != 2 or z_values.shape != (n, len(latent_dims)):
            raise ValueError("z_values must have shape (n, len(latent_dims))")
        if attr_values.shape != (n, self.c):
            raise ValueError(f"attr_values must have shape (n, {self.c})")
        if n == 0:
            return np.empty(0)
        if len(latent_dims) and not np.all(np.isfinite(z_values)):
            raise ValueError("observed latent values must be finite")
        for i in range(self.c):
            col = attr_values[:, i]
            if col.max(initial=-1) >= self.cardinalities[i] or col.min(initial=-1) < -1:
                raise ValueError(f"attribute {i} value out of range")
        col_of = {k: pos for pos, k in enumerate(latent_dims)}
        items = []
        for p, v in enumerate(self._perm):
            if v < self.d:
                if v in col_of:
                    items.append(
                        observed_matrix(
                            self._trip.cores.abs_cores[v],
                            z_values[:, col_of[v]],
                            self._trip.means[v],
                            self._trip.log_stds[v],
                        )
                    )
                else:
                    items.append((self._summed_ring[p], 0.0))
            else:
                i = v - self.d
                col = attr_values[:, i]
                observed = col >= 0
                if not observed.any():
                    items.append((self._summed_ring[p], 0.0))
                else:
                    mats = np.empty((n,) + self._summed_ring[p].shape)
                    mats[~observed] = self._summed_ring[p]
                    mats[observed] = self._abs_attr_cores[i][col[observed]]
                    items.append((mats, 0.0))
        return chain_logtrace(items, n) - self.log_normalizer

    def log_attr_given_z(self, z: Sequence[float], attrs: PartialAttributes) -> float:
        """log p(observed attributes | z) for a fully observed latent vector."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.d,):
            raise ValueError(f"z must be a full vector of length d={self.d}")
        z_mask = dict(enumerate(z))
        return self.log_joint(z_mask, attrs) - self.log_joint(z_mask, {})

    # -- sampling ------------------------------------------------------------------
    def sample_given_attrs(
        self, attrs: PartialAttributes | None = None, *, rng: "int | np.random.Generator"
    ) -> np.ndarray:
        """Draw one latent vector conditioned on the observed attributes;
        missing attributes are marginalized."""
        return self.sample_given_attrs_batch(1, attrs, rng=rng)[0]

    def sample_given_attrs_batch(
        self,
        n: int,
        attrs: PartialAttributes | None = None,
        *,
        rng: "int | np.random.Generator",
    ) -> np.ndarray:
        attrs = self._check_attrs(attrs or {})
        gen = _as_rng(rng)
        n = int(n)

        fixed_mats = []
        for p, v in enumerate(self._perm):
            if v >= self.d and (v - self.d) in attrs:
                fixed_mats.append(self._abs_attr_cores[v - self.d][attrs[v - self.d]])
            else:
                fixed_mats.append(self._summed_ring[p])
        if not np.isfinite(
            float(chain_logtrace(((m, 0.0) for m in fixed_mats), 1)[0])
        ):
            raise ConditionOnNullError("observed attributes have probability zero")

        suffix = suffix_products(fixed_mats)
        m0 = fixed_mats[0].shape[0]
        buf = np.broadcast_to(np.eye(m0), (n, m0, m0)).copy()
        out = np.empty((n, self.d))
        for p, v in enumerate(self._perm):
            if v >= self.d:
                buf = np.einsum("nab,bc->nac", buf, fixed_mats[p])
            else:
                core = self._trip.cores.abs_cores[v]
                t = np.einsum("ca,nab->ncb", suffix[p + 1], buf)
                weights = np.einsum("ncb,sbc->ns", t, core)
                totals = weights.sum(axis=1)
                if not np.all(np.isfinite(totals) & (totals > 0.0)):
                    raise ConditionOnNullError(
                        "zero conditional mass encountered during sampling"
                    )
                cum = np.cumsum(weights, axis=1)
                u = gen.random(n) * totals
                idx = np.minimum((cum <= u[:, None]).sum(axis=1), core.shape[0] - 1)
                z = self._trip.means[v][idx] + np.exp(
                    self._trip.log_stds[v][idx]
                ) * gen.standard_normal(n)
                out[:, v] = z
                step, _ = observed_matrix(
                    core, z, self._trip.means[v], self._trip.log_stds[v]
                )
                buf = np.einsum("nab,nbc->nac", buf, step)
            scale = buf.max(axis=(1, 2))
            buf = buf / np.where(scale > 0.0, scale, 1.0)[:, None, None]
        return out
