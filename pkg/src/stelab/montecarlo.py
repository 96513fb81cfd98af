"""Sampling oracle: per-sample loss and gradients under seeded Gaussian inputs.

Inputs are drawn in fixed-size blocks.  Block ``k`` of stream ``s`` under seed ``seed``
comes from its own Philox generator keyed by ``SeedSequence(seed, spawn_key=(s, k))``,
so a block's contents never depend on how many blocks are drawn, in what order, or by
how many workers.  Block results are merged in index order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import kernels
from .model import DomainError, ModelParams, TeacherParams
from .ste import SteKind

__all__ = [
    "GENERATOR_VERSION",
    "SampleBatch",
    "McEstimate",
    "sample_loss",
    "sample_grad_v",
    "sample_coarse_grad",
    "sample_quantities",
    "estimate_expectation",
    "model_quantities",
]

GENERATOR_VERSION = "philox4x64-10/seedseq-spawn/v1"
DEFAULT_BLOCK = 16384


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleBatch:
    """``n_samples`` i.i.d. standard normal ``m x n`` matrices, generated lazily in blocks."""

    m: int
    n: int
    n_samples: int
    seed: int
    stream: int = 0
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError("matrix dimensions must be positive")
        if self.n_samples < 0:
            raise DomainError("n_samples must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise DomainError("block_size must be positive")

    @property
    def n_blocks(self) -> int:
        return -(-self.n_samples // self.block_size)

    def block(self, k: int) -> np.ndarray:
        start = k * self.block_size
        size = min(self.block_size, self.n_samples - start)
        if size <= 0:
            raise IndexError(k)
        return block_generator(self.seed, self.stream, k).standard_normal((size, self.m, self.n))

    def blocks(self) -> Iterator[np.ndarray]:
        for k in range(self.n_blocks):
            yield self.block(k)

    @property
    def z_matrices(self) -> np.ndarray:
        """All samples as one ``(N, m, n)`` array. Use ``blocks()`` for large N."""
        if self.n_samples == 0:
            return np.empty((0, self.m, self.n))
        return np.concatenate(list(self.blocks()), axis=0)


@dataclass(frozen=True)
class McEstimate:
    mean: np.ndarray
    std_error: np.ndarray
    n_samples: int

    def z_scores(self, expected) -> np.ndarray:
        """``(mean - expected) / std_error``; exact matches with zero error give 0."""
        diff = self.mean - np.asarray(expected, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.std_error > 0, diff / self.std_error, np.where(diff == 0, 0.0, np.inf))
        return np.abs(z)

    def agrees(self, expected, sigmas: float = 4.0) -> bool:
        return bool(np.all(self.z_scores(expected) <= sigmas))


def estimate_expectation(f: Callable[[np.ndarray], np.ndarray], batch: SampleBatch) -> McEstimate:
    """Componentwise mean and standard error of a per-sample function.

    ``f`` maps a block of inputs ``(B, m, n)`` to per-sample values ``(B,)`` or
    ``(B, d)``.  Blocks are combined with the pairwise mean/M2 update, in block order.
    """
    if batch.n_samples < 2:
        raise DomainError("need at least 2 samples for a standard error")
    count = 0
    mean = None
    m2 = None
    for z in batch.blocks():
        vals = np.asarray(f(z), dtype=np.float64)
        vals = vals.reshape(vals.shape[0], -1)
        nb = vals.shape[0]
        bmean = vals.mean(axis=0)
        bm2 = ((vals - bmean) ** 2).sum(axis=0)
        if mean is None:
            mean, m2, count = bmean, bm2, nb
            continue
        total = count + nb
        delta = bmean - mean
        mean = mean + delta * (nb / total)
        m2 = m2 + bm2 + delta * delta * (count * nb / total)
        count = total
    std = np.sqrt(m2 / (count - 1))
    return McEstimate(mean, std / np.sqrt(count), count)


def _check(p: ModelParams, t: TeacherParams, z: np.ndarray) -> np.ndarray:
    t.check_compatible(p)
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-2:] != (p.m, p.n) or z.ndim not in (2, 3):
        raise DomainError(f"input must have shape (m, n) or (B, m, n) with m={p.m}, n={p.n}")
    return z


def sample_quantities(p: ModelParams, t: TeacherParams, z) -> dict:
    """Loss, v-gradient and all three coarse w-gradients for each input in ``z``."""
    z = _check(p, t, z)
    single = z.ndim == 2
    loss, grad_v, coarse = kernels.mc_block(z, p.v, p.w, t.v_star, t.w_star)
    out = {"loss": loss, "grad_v": grad_v}
    for kind in SteKind:
        out[kind] = coarse[kind.code]
    if single:
        out = {k: a[0] for k, a in out.items()}
    return out


def sample_loss(p: ModelParams, t: TeacherParams, z):
    """``0.5 (v' sigma(Z w) - v*' sigma(Z w*))^2`` with ``sigma(x) = 1{x > 0}``."""
    out = sample_quantities(p, t, z)["loss"]
    return float(out) if np.ndim(out) == 0 else out


def sample_grad_v(p: ModelParams, t: TeacherParams, z) -> np.ndarray:
    return sample_quantities(p, t, z)["grad_v"]


def sample_coarse_grad(kind, p: ModelParams, t: TeacherParams, z) -> np.ndarray:
    """``Z' (mu'(Z w) * v) (v' sigma(Z w) - y*(Z))`` for the chosen estimator."""
    return sample_quantities(p, t, z)[SteKind.parse(kind)]


def model_quantities(p: ModelParams, t: TeacherParams) -> Callable[[np.ndarray], np.ndarray]:
    """Per-sample function stacking ``[loss, grad_v, g_identity, g_relu, g_crelu]``.

    Column layout: 1 + m + 3n values per sample.
    """
    t.check_compatible(p)

    def f(z):
        loss, grad_v, coarse = kernels.mc_block(z, p.v, p.w, t.v_star, t.w_star)
        return np.concatenate([loss[:, None], grad_v, coarse[0], coarse[1], coarse[2]], axis=1)

    return f


def split_quantities(vec: np.ndarray, m: int, n: int) -> dict:
    """Inverse of the ``model_quantities`` column layout."""
    out = {"loss": vec[0], "grad_v": vec[1 : 1 + m]}
    for kind in SteKind:
        start = 1 + m + kind.code * n
        out[kind] = vec[start : start + n]
    return out
