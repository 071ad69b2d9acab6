"""Maximum-likelihood fitting by minibatch gradient ascent.

Means and standard deviations are initialized per dimension with a small
1-D Gaussian-mixture EM (fixed iteration count, kmeans++-style seeding);
cores start as standard normal noise, which the absolute-value rule turns
into valid non-negative weights. The optimizer is Adam. Optionally, mixtures
and cores are re-initialized from the data on a fixed epoch period, which
mirrors how the prior is refreshed when the data stream itself drifts; on a
static dataset it discards progress, so it is off by default.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .continuous import TripModel, gaussian_logpdf
from .errors import DegenerateDistributionError, DivergenceError
from .gradients import _AttrTerm, _GaussTerm, _weighted_chain_grad
from .joint import JointModel, make_permutation

EpochCallback = Callable[[int, float], None]


@dataclass
class FitConfig:
    """Optimizer hyperparameters and initialization policy."""

    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    reinit_period_epochs: int = 0  # 0 disables periodic re-initialization
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.reinit_period_epochs < 0:
            raise ValueError("reinit_period_epochs must be >= 0")


class _Adam:
    """Adam on a list of arrays, updated in place in a fixed order."""

    def __init__(self, params: Sequence[np.ndarray], config: FitConfig):
        self.lr = config.learning_rate
        self.b1, self.b2, self.eps = config.beta1, config.beta2, config.eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def fit_gmm_1d(
    x: np.ndarray,
    n_components: int,
    rng: np.random.Generator,
    n_iter: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """EM fit of a 1-D Gaussian mixture; returns (means, stds).

    Seeds are chosen kmeans++ style: each new center is a data point drawn
    with probability proportional to its squared distance from the centers
    picked so far. Standard deviations are floored to avoid collapse onto a
    single point.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(n_components - 1):
        d2 = np.min((x[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total > 0:
            centers.append(x[rng.choice(n, p=d2 / total)])
        else:
            centers.append(x[rng.integers(n)])
    means = np.array(centers)

    spread = float(x.std())
    floor = max(1e-6, 1e-3 * spread)
    stds = np.full(n_components, max(spread, floor))
    log_weights = np.full(n_components, -np.log(n_components))

    for _ in range(n_iter):
        logr = log_weights[None, :] + gaussian_logpdf(
            x[:, None], means[None, :], np.log(stds)[None, :]
        )
        shift = logr.max(axis=1, keepdims=True)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        r = np.exp(logr - shift)
        r /= r.sum(axis=1, keepdims=True)
        mass = r.sum(axis=0)
        alive = mass > 1e-12
        log_weights = np.log(np.maximum(mass / n, 1e-300))
        means = np.where(alive, (r * x[:, None]).sum(axis=0) / np.maximum(mass, 1e-300), means)
        var = (r * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / np.maximum(mass, 1e-300)
        stds = np.where(alive, np.sqrt(np.maximum(var, floor**2)), stds)
    return means, stds


def nll_regression_epochs(
    history: Sequence[float], window: int = 10, tol: float = 1e-2
) -> list[int]:
    """Epochs after which the loss failed to dip within the next ``window``.

    Single-epoch noise is tolerated: an epoch is flagged only when none of
    the following ``window`` epochs improves on it by more than ``tol``.
    """
    return [
        i
        for i in range(len(history) - window)
        if min(history[i + 1 : i + 1 + window]) > history[i] + tol
    ]


def _check_data(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("data must be an (n, d) matrix with at least one row")
    if not np.all(np.isfinite(data)):
        raise ValueError("data contains non-finite values")
    return data


def _run_training(
    data_cols: np.ndarray,
    make_terms: Callable[[np.ndarray], list],
    params: list[np.ndarray],
    grad_order: Callable[[list], list[np.ndarray]],
    reinit: Callable[[], None] | None,
    config: FitConfig,
    rng: np.random.Generator,
    on_epoch: EpochCallback | None,
) -> list[float]:
    n = data_cols.shape[0]
    opt = _Adam(params, config)
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total_logp = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            b = idx.shape[0]
            try:
                logp, grads = _weighted_chain_grad(
                    make_terms(idx), b, np.full(b, 1.0 / b)
                )
            except DegenerateDistributionError as exc:
                raise DivergenceError(epoch, f"epoch {epoch}: {exc}") from exc
            opt.step(params, grad_order(grads))
            total_logp += float(logp.sum())
        nll = -total_logp / n
        if not np.isfinite(nll):
            raise DivergenceError(epoch)
        history.append(nll)
        if on_epoch is not None:
            on_epoch(epoch, nll)
        period = config.reinit_period_epochs
        if reinit is not None and period > 0 and (epoch + 1) % period == 0 and epoch + 1 < config.epochs:
            reinit()
            opt = _Adam(params, config)
    for i in nll_regression_epochs(history):
        warnings.warn(
            f"training NLL did not improve in the 10 epochs after epoch {i}",
            stacklevel=2,
        )
        break
    return history


def fit_mle(
    data: np.ndarray,
    n_components: int,
    core_size: int,
    config: FitConfig | None = None,
    on_epoch: EpochCallback | None = None,
) -> TripModel:
    """Fit a continuous model to data by maximum likelihood.

    ``n_components`` is the number of Gaussian components per dimension and
    ``core_size`` the (uniform) ring matrix size. ``on_epoch`` receives
    ``(epoch, mean_nll)`` after every epoch.
    """
    data = _check_data(data)
    config = config or FitConfig()
    n_components, core_size = int(n_components), int(core_size)
    if n_components < 1 or core_size < 1:
        raise ValueError("n_components and core_size must be >= 1")
    d = data.shape[1]
    rng = np.random.default_rng(config.seed)

    means: list[np.ndarray] = []
    log_stds: list[np.ndarray] = []
    cores: list[np.ndarray] = []

    def initialize() -> None:
        for j in range(d):
            mu, sd = fit_gmm_1d(data[:, j], n_components, rng)
            if len(means) <= j:
                means.append(mu)
                log_stds.append(np.log(sd))
                cores.append(rng.standard_normal((n_components, core_size, core_size)))
            else:
                means[j][:] = mu
                log_stds[j][:] = np.log(sd)
                cores[j][:] = rng.standard_normal((n_components, core_size, core_size))

    initialize()
    params = cores + means + log_stds

    def make_terms(idx: np.ndarray) -> list:
        batch = data[idx]
        return [
            _GaussTerm(cores[j], means[j], log_stds[j], batch[:, j]) for j in range(d)
        ]

    def grad_order(grads: list) -> list[np.ndarray]:
        out = [-g.d_core for g in grads]
        out += [-g.d_mean for g in grads]
        out += [-g.d_log_std for g in grads]
        return out

    _run_training(data, make_terms, params, grad_order, initialize, config, rng, on_epoch)
    return TripModel(cores, means, log_stds=log_stds)


def fit_joint_mle(
    latents: np.ndarray,
    attributes: np.ndarray,
    cardinalities: Sequence[int],
    n_components: int,
    core_size: int,
    config: FitConfig | None = None,
    permutation: Sequence[int] | None = None,
    attribute_names: Sequence[str] | None = None,
    on_epoch: EpochCallback | None = None,
) -> JointModel:
    """Fit a joint latent-attribute model by maximizing mean log p(z, y_ob).

    ``attributes`` is an ``(n, c)`` integer matrix; ``-1`` marks a missing
    value, which enters the likelihood through exact marginalization rather
    than imputation.
    """
    latents = _check_data(latents)
    config = config or FitConfig()
    attributes = np.asarray(attributes, dtype=int)
    if attributes.ndim != 2 or attributes.shape[0] != latents.shape[0]:
        raise ValueError("attributes must be (n, c) aligned with latents")
    cards = [int(cv) for cv in cardinalities]
    if attributes.shape[1] != len(cards):
        raise ValueError("one cardinality per attribute column required")
    for i, cv in enumerate(cards):
        col = attributes[:, i]
        if cv < 1 or col.max(initial=-1) >= cv or col.min(initial=-1) < -1:
            raise ValueError(f"attribute column {i} out of range for cardinality {cv}")
    n_components, core_size = int(n_components), int(core_size)
    if n_components < 1 or core_size < 1:
        raise ValueError("n_components and core_size must be >= 1")

    d, c = latents.shape[1], len(cards)
    rng = np.random.default_rng(config.seed)
    if permutation is None:
        permutation = make_permutation(d, c, rng)
    perm = np.asarray(permutation, dtype=int)

    means: list[np.ndarray] = []
    log_stds: list[np.ndarray] = []
    latent_cores: list[np.ndarray] = []
    attr_cores: list[np.ndarray] = []

    def initialize() -> None:
        for j in range(d):
            mu, sd = fit_gmm_1d(latents[:, j], n_components, rng)
            if len(means) <= j:
                means.append(mu)
                log_stds.append(np.log(sd))
                latent_cores.append(
                    rng.standard_normal((n_components, core_size, core_size))
                )
            else:
                means[j][:] = mu
                log_stds[j][:] = np.log(sd)
                latent_cores[j][:] = rng.standard_normal(
                    (n_components, core_size, core_size)
                )
        for i, cv in enumerate(cards):
            if len(attr_cores) <= i:
                attr_cores.append(rng.standard_normal((cv, core_size, core_size)))
            else:
                attr_cores[i][:] = rng.standard_normal((cv, core_size, core_size))

    initialize()
    params = latent_cores + attr_cores + means + log_stds

    def make_terms(idx: np.ndarray) -> list:
        batch_z = latents[idx]
        batch_y = attributes[idx]
        terms = []
        for v in perm:
            if v < d:
                terms.append(
                    _GaussTerm(latent_cores[v], means[v], log_stds[v], batch_z[:, v])
                )
            else:
                terms.append(_AttrTerm(attr_cores[v - d], batch_y[:, v - d]))
        return terms

    def grad_order(grads: list) -> list[np.ndarray]:
        by_var = {int(v): g for v, g in zip(perm, grads)}
        out = [-by_var[v].d_core for v in range(d)]
        out += [-by_var[d + i].d_core for i in range(c)]
        out += [-by_var[v].d_mean for v in range(d)]
        out += [-by_var[v].d_log_std for v in range(d)]
        return out

    _run_training(latents, make_terms, params, grad_order, initialize, config, rng, on_epoch)
    trip = TripModel(latent_cores, means, log_stds=log_stds)
    return JointModel(trip, attr_cores, perm, attribute_names)
