"""Shared generators for seeded random test instances."""

import numpy as np

import trip


def random_core_set(rng, counts, sizes=None, min_mag=0.0):
    """Cores with normal entries; ``min_mag`` pushes entries away from zero
    (finite differences across the |x| kink need a safety margin)."""
    d = len(counts)
    if sizes is None:
        sizes = [2] * d
    cores = []
    for k in range(d):
        shape = (counts[k], sizes[k], sizes[(k + 1) % d])
        c = rng.standard_normal(shape)
        if min_mag > 0.0:
            c = np.where(np.abs(c) < min_mag, c + 2 * min_mag * np.sign(c + 0.5), c)
        cores.append(c)
    return trip.CoreSet(cores)


def random_trip_model(rng, counts, sizes=None, min_mag=0.0, mean_scale=2.0):
    cores = random_core_set(rng, counts, sizes, min_mag)
    means = [rng.normal(0.0, mean_scale, n) for n in counts]
    stds = [rng.uniform(0.5, 1.5, n) for n in counts]
    return trip.TripModel(cores, means, stds)


def random_joint_model(rng, counts, cards, sizes=None, permutation=None):
    d, c = len(counts), len(cards)
    m = (sizes or [2] * d)[0]
    model = random_trip_model(rng, counts, sizes)
    attr_cores = [rng.standard_normal((card, m, m)) for card in cards]
    if permutation is None:
        permutation = trip.make_permutation(d, c, rng)
    return trip.JointModel(model, attr_cores, permutation)


def four_mode_data(n, weights, rng, sigma=0.2):
    """2-D mixture with modes on (+-1, +-1); ``weights`` indexed [s1][s2]."""
    w = np.asarray(weights, dtype=float).reshape(4)
    modes = np.array([(-1, -1), (-1, 1), (1, -1), (1, 1)], dtype=float)
    idx = rng.choice(4, size=n, p=w)
    return modes[idx] + sigma * rng.standard_normal((n, 2))


def four_mode_nll(data, weights, sigma=0.2):
    """Mean negative log-density of ``data`` under the generating mixture."""
    w = np.asarray(weights, dtype=float).reshape(4)
    modes = np.array([(-1, -1), (-1, 1), (1, -1), (1, 1)], dtype=float)
    logps = np.stack(
        [
            np.log(wk) - 0.5 * (((data - mk) / sigma) ** 2).sum(axis=1)
            - 2 * np.log(sigma) - np.log(2 * np.pi)
            for wk, mk in zip(w, modes)
        ]
    )
    top = logps.max(axis=0)
    return float(-np.mean(top + np.log(np.exp(logps - top).sum(axis=0))))
