"""Numerically stable products of non-negative matrix chains.

Every distribution in this package reduces to traces of long products of
non-negative matrices. Entries of such products overflow or underflow long
before the final log-trace does, so all chain walks here renormalize the
running buffer after every multiplication: the buffer is divided by its
largest entry and the log of the divisor is accumulated separately. Any
consistent positive divisor would do; the max entry is the cheapest.

Matrices are passed as ``(mat, logscale)`` pairs whose value is
``mat * exp(logscale)``. ``mat`` is either ``(m, m')`` (shared by all rows
of a batch) or ``(n, m, m')`` (one per row); ``logscale`` is ``0.0``, a
scalar, or an ``(n,)`` array.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Item = tuple[np.ndarray, "np.ndarray | float"]


def _multiply(buf: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Right-multiply a batch of buffers ``(n, a, b)`` by ``mat``."""
    if mat.ndim == 2:
        return np.einsum("nab,bc->nac", buf, mat)
    return np.einsum("nab,nbc->nac", buf, mat)


def _renormalize(buf: np.ndarray, acc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each row by its max entry; add the log divisor to ``acc``.

    Rows that collapsed to exactly zero are left as-is (their trace is zero
    and the caller maps that to -inf), with a divisor of one so the log
    accumulator stays finite.
    """
    scale = buf.max(axis=(1, 2))
    safe = np.where(scale > 0.0, scale, 1.0)
    return buf / safe[:, None, None], acc + np.log(safe)


def _identity_batch(m: int, n: int) -> np.ndarray:
    return np.broadcast_to(np.eye(m), (n, m, m)).copy()


def chain_logtrace(items: Iterable[Item], n: int) -> np.ndarray:
    """log Tr of the ordered matrix product, one value per batch row.

    Rows whose product has zero trace yield ``-inf``.
    """
    buf: np.ndarray | None = None
    acc = np.zeros(n)
    for mat, logscale in items:
        if buf is None:
            buf = _identity_batch(mat.shape[-2], n)
        buf = _multiply(buf, mat)
        acc = acc + logscale
        buf, acc = _renormalize(buf, acc)
    if buf is None:
        return np.zeros(n)
    trace = np.trace(buf, axis1=1, axis2=2)
    out = np.where(trace > 0.0, np.log(np.where(trace > 0.0, trace, 1.0)), -np.inf)
    return out + acc


def prefix_chain(items: Sequence[Item], n: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Normalized partial products from the left.

    Returns ``(P, a)`` with ``P[j] * exp(a[:, j])`` equal to the true product
    of items ``0..j-1``; ``P[0]`` is the identity and ``a`` has shape
    ``(n, d + 1)``.
    """
    d = len(items)
    m0 = items[0][0].shape[-2]
    prods = [_identity_batch(m0, n)]
    acc = np.zeros((n, d + 1))
    running = np.zeros(n)
    for j, (mat, logscale) in enumerate(items):
        buf = _multiply(prods[-1], mat)
        running = running + logscale
        buf, running = _renormalize(buf, running)
        prods.append(buf)
        acc[:, j + 1] = running
    return prods, acc


def suffix_chain(items: Sequence[Item], n: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Normalized partial products from the right.

    Returns ``(S, b)`` with ``S[j] * exp(b[:, j])`` equal to the true product
    of items ``j..d-1``; ``S[d]`` is the identity.
    """
    d = len(items)
    m_last = items[-1][0].shape[-1]
    prods = [_identity_batch(m_last, n)]
    acc = np.zeros((n, d + 1))
    running = np.zeros(n)
    for j in range(d - 1, -1, -1):
        mat, logscale = items[j]
        if mat.ndim == 2:
            buf = np.einsum("ab,nbc->nac", mat, prods[-1])
        else:
            buf = np.einsum("nab,nbc->nac", mat, prods[-1])
        running = running + logscale
        buf, running = _renormalize(buf, running)
        prods.append(buf)
        acc[:, j] = running
    prods.reverse()
    return prods, acc


def suffix_products(mats: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Right-to-left normalized products of plain ``(m, m')`` matrices.

    Scale factors are dropped: callers use these only inside ratios that are
    normalized afterwards. ``out[j]`` is proportional to the product of
    ``mats[j:]``; ``out[d]`` is the identity.
    """
    d = len(mats)
    out = [np.eye(mats[-1].shape[-1])]
    for j in range(d - 1, -1, -1):
        prod = mats[j] @ out[-1]
        scale = prod.max()
        if scale > 0.0:
            prod = prod / scale
        out.append(prod)
    out.reverse()
    return out
