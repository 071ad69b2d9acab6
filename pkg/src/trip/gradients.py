"""Exact gradients of ring-mixture log-densities, and Monte-Carlo estimators.

The log-density is ``log Tr(prod_j M_j) - log Tr(prod_j S_j)`` where the
``M_j`` are likelihood-weighted slice sums and the ``S_j`` plain slice sums.
Reverse mode through a trace of a matrix chain is closed-form: the adjoint of
the ``j``-th factor is the transposed product of all the others, divided by
the trace. Both passes reuse the renormalized prefix/suffix products, so the
gradient is as overflow-proof as the forward pass.

The absolute-value reparameterization of core entries contributes a factor
``sign(q)`` per entry, with subgradient 0 at exactly zero (parameters
initialized from continuous noise are never exactly zero in practice).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .chain import chain_logtrace, prefix_chain, suffix_chain
from .continuous import TripModel, _component_weights, gaussian_logpdf
from .cores import _as_rng
from .errors import DegenerateDistributionError


@dataclass
class GradPsi:
    """Gradient with respect to every model parameter.

    ``d_cores`` differentiates the stored (signed) core entries; ``d_means``
    and ``d_log_stds`` the per-dimension component parameters.
    """

    d_cores: list[np.ndarray]
    d_means: list[np.ndarray]
    d_log_stds: list[np.ndarray]

    def as_vector(self) -> np.ndarray:
        parts = [g.ravel() for g in self.d_cores]
        parts += [g.ravel() for g in self.d_means]
        parts += [g.ravel() for g in self.d_log_stds]
        return np.concatenate(parts)


# -- ring terms ---------------------------------------------------------------
# A term is one position of the ring chain plus enough context to route its
# adjoint back to parameter gradients.


@dataclass
class _GaussTerm:
    core: np.ndarray  # stored values, signs intact
    means: np.ndarray
    log_stds: np.ndarray
    z: np.ndarray  # (n,)


@dataclass
class _AttrTerm:
    core: np.ndarray
    values: np.ndarray  # (n,) ints, -1 marks a missing (marginalized) value


@dataclass
class _TermGrad:
    d_core: np.ndarray
    d_mean: np.ndarray | None = None
    d_log_std: np.ndarray | None = None


def _forward_item(term) -> tuple[np.ndarray, "np.ndarray | float", np.ndarray | None]:
    """Ring matrices for a term: ``(mats, logshift, gauss_weights)``."""
    abs_core = np.abs(term.core)
    if isinstance(term, _GaussTerm):
        weights, shift = _component_weights(term.z, term.means, term.log_stds)
        return np.einsum("kab,nk->nab", abs_core, weights), shift, weights
    summed = abs_core.sum(axis=0)
    observed = term.values >= 0
    if not observed.any():
        return summed, 0.0, None
    mats = np.empty((term.values.shape[0],) + summed.shape)
    mats[~observed] = summed
    mats[observed] = abs_core[term.values[observed]]
    return mats, 0.0, None


def _adjoints(
    items: Sequence, n: int, row_weights: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Per-position weighted adjoints of log Tr of the item chain.

    Returns ``(logtrace, G)`` where ``G[j][i]`` is ``row_weights[i]`` times
    the derivative of ``log Tr`` for row ``i`` with respect to the true
    (unscaled) matrix of position ``j``, re-expressed against the stabilized
    matrix actually used in the forward pass.
    """
    prefixes, a = prefix_chain(items, n)
    suffixes, b = suffix_chain(items, n)
    trace = np.trace(prefixes[-1], axis1=1, axis2=2)
    if not np.all(trace > 0.0):
        raise DegenerateDistributionError("zero trace: gradient undefined")
    logtrace = np.log(trace) + a[:, -1]
    adj = []
    for j, (mat, logshift) in enumerate(items):
        outer = np.einsum("nca,nab->ncb", suffixes[j + 1], prefixes[j])
        factor = row_weights * np.exp(a[:, j] + b[:, j + 1] + logshift - a[:, -1]) / trace
        adj.append(np.transpose(outer, (0, 2, 1)) * factor[:, None, None])
    return logtrace, adj


def _weighted_chain_grad(
    terms: Sequence, n: int, row_weights: np.ndarray
) -> tuple[np.ndarray, list[_TermGrad]]:
    """Log-probabilities and the weighted sum of per-row parameter gradients.

    Computes ``sum_i row_weights[i] * grad log p(row_i)`` together with the
    per-row log-probabilities of the normalized chain.
    """
    forwards = [_forward_item(t) for t in terms]
    items = [(mats, shift) for mats, shift, _ in forwards]
    logtrace, adj = _adjoints(items, n, row_weights)

    norm_items = [(np.abs(t.core).sum(axis=0), 0.0) for t in terms]
    total_weight = np.array([row_weights.sum()])
    lognorm, norm_adj = _adjoints(norm_items, 1, total_weight)
    logp = logtrace - lognorm[0]

    grads = []
    for term, (mats, _, gauss_w), g, h in zip(terms, forwards, adj, norm_adj):
        abs_grad = np.zeros_like(term.core)
        if isinstance(term, _GaussTerm):
            u = np.einsum("nab,kab->nk", g, np.abs(term.core))
            e = u * gauss_w
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                # blown-up parameters land here with inf/nan, which the
                # divergence check downstream turns into a clear error
                stds = np.exp(term.log_stds)
                zc = (term.z[:, None] - term.means[None, :]) / stds[None, :]
                d_mean = np.einsum("nk,nk->k", e, zc / stds[None, :])
                d_log_std = np.einsum("nk,nk->k", e, zc * zc - 1.0)
            abs_grad += np.einsum("nab,nk->kab", g, gauss_w)
            abs_grad -= h[0]
            grads.append(_TermGrad(np.sign(term.core) * abs_grad, d_mean, d_log_std))
        else:
            observed = term.values >= 0
            if observed.any():
                np.add.at(abs_grad, term.values[observed], g[observed])
            if (~observed).any():
                abs_grad += g[~observed].sum(axis=0)
            abs_grad -= h[0]
            grads.append(_TermGrad(np.sign(term.core) * abs_grad))
    return logp, grads


def _gauss_terms(
    cores: Sequence[np.ndarray],
    means: Sequence[np.ndarray],
    log_stds: Sequence[np.ndarray],
    samples: np.ndarray,
) -> list[_GaussTerm]:
    return [
        _GaussTerm(cores[k], means[k], log_stds[k], samples[:, k])
        for k in range(len(cores))
    ]


def _model_terms(model: TripModel, samples: np.ndarray) -> list[_GaussTerm]:
    return _gauss_terms(
        [c for c in model.cores.cores], list(model.means), list(model.log_stds), samples
    )


def grad_log_density(model: TripModel, z: Sequence[float]) -> tuple[float, GradPsi]:
    """Log-density at ``z`` (fully observed) and its exact parameter gradient."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if z.shape[1] != model.d:
        raise ValueError(f"z must have length d={model.d}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    logp, grads = _weighted_chain_grad(_model_terms(model, z), 1, np.ones(1))
    return float(logp[0]), GradPsi(
        d_cores=[g.d_core for g in grads],
        d_means=[g.d_mean for g in grads],
        d_log_stds=[g.d_log_std for g in grads],
    )


def reinforce_grad(
    model: TripModel, samples: np.ndarray, scores: Sequence[float]
) -> GradPsi:
    """Score-function gradient estimate with the mean score as baseline.

    Averages ``grad log p(z_i) * (score_i - mean score)`` over the batch;
    constant scores therefore produce an exactly zero gradient.
    """
    samples = np.asarray(samples, dtype=float)
    scores = np.asarray(scores, dtype=float).reshape(-1)
    if samples.ndim != 2 or samples.shape[1] != model.d:
        raise ValueError(f"samples must have shape (l, {model.d})")
    if scores.shape[0] != samples.shape[0]:
        raise ValueError("scores must match samples")
    if scores.shape[0] < 2:
        raise ValueError("need at least 2 samples: the mean baseline is undefined")
    if scores.max() == scores.min():
        # constant scores center to exactly zero; skip the float round trip
        weights = np.zeros(scores.shape[0])
    else:
        weights = (scores - scores.mean()) / scores.shape[0]
    _, grads = _weighted_chain_grad(_model_terms(model, samples), samples.shape[0], weights)
    return GradPsi(
        d_cores=[g.d_core for g in grads],
        d_means=[g.d_mean for g in grads],
        d_log_stds=[g.d_log_std for g in grads],
    )


def kl_and_elbo_mc(
    model: TripModel,
    q_mean: Sequence[float],
    q_std: Sequence[float],
    recon_logp: Callable[[np.ndarray], float],
    num_samples: int,
    rng: "int | np.random.Generator",
) -> dict[str, float]:
    """Monte-Carlo estimates of KL(q || model) and of the evidence lower bound.

    ``q`` is the diagonal Gaussian with the given mean and std; samples are
    drawn by the location-scale transform. ``recon_logp`` maps a latent vector
    to a reconstruction log-likelihood (use ``lambda z: 0.0`` to get the KL
    term alone).
    """
    q_mean = np.asarray(q_mean, dtype=float).reshape(-1)
    q_std = np.asarray(q_std, dtype=float).reshape(-1)
    if q_mean.shape[0] != model.d or q_std.shape[0] != model.d:
        raise ValueError(f"q_mean/q_std must have length d={model.d}")
    if not np.all(q_std > 0.0):
        raise ValueError("q_std must be positive")
    num_samples = int(num_samples)
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    gen = _as_rng(rng)
    eps = gen.standard_normal((num_samples, model.d))
    z = q_mean[None, :] + eps * q_std[None, :]
    log_q = gaussian_logpdf(z, q_mean[None, :], np.log(q_std)[None, :]).sum(axis=1)
    log_p = model.log_densities(range(model.d), z)
    recon = np.array([float(recon_logp(row)) for row in z])
    kl = float(np.mean(log_q - log_p))
    elbo = float(np.mean(recon + log_p - log_q))
    return {"elbo": elbo, "kl": kl}


# -- flat parameter views (used by optimizers and finite-difference checks) ----


def param_vector(model: TripModel) -> np.ndarray:
    """Stored core entries, means, and log-stds flattened into one vector."""
    parts = [c.ravel() for c in model.cores.cores]
    parts += [m.ravel() for m in model.means]
    parts += [ls.ravel() for ls in model.log_stds]
    return np.concatenate(parts)


def model_from_vector(template: TripModel, vec: np.ndarray) -> TripModel:
    """Rebuild a model shaped like ``template`` from a flat parameter vector."""
    vec = np.asarray(vec, dtype=float)
    cores, means, stds = [], [], []
    pos = 0
    for c in template.cores.cores:
        size = int(np.prod(c.shape))
        cores.append(vec[pos : pos + size].reshape(c.shape))
        pos += size
    for m in template.means:
        means.append(vec[pos : pos + m.shape[0]])
        pos += m.shape[0]
    for ls in template.log_stds:
        stds.append(vec[pos : pos + ls.shape[0]])
        pos += ls.shape[0]
    if pos != vec.shape[0]:
        raise ValueError("parameter vector length mismatch")
    return TripModel(cores, means, log_stds=stds)
