"""Masked perturbations of an instance and the simplified inputs they induce."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .types import AnnotatedInstance

DEFAULT_MASK_TOKEN = "<mask>"
DEFAULT_COUNT_QA = 2048
DEFAULT_COUNT_NLI = 512

EXHAUSTIVE_LIMIT = 20


class Strategy(str, Enum):
    UNIFORM_SIZE = "uniform_size"
    BERNOULLI = "bernoulli"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class Mask:
    """Binary presence vector: 1 keeps the token, 0 replaces it with the mask symbol."""

    bits: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def active(self) -> int:
        return sum(self.bits)

    @classmethod
    def ones(cls, n: int) -> "Mask":
        return cls(bits=(1,) * n)

    @classmethod
    def zeros(cls, n: int) -> "Mask":
        return cls(bits=(0,) * n)


@dataclass(frozen=True)
class PerturbationConfig:
    count: int = DEFAULT_COUNT_QA
    mask_token: str = DEFAULT_MASK_TOKEN
    strategy: Strategy = Strategy.UNIFORM_SIZE
    bernoulli_p: float = 0.5
    seed: int = 0
    include_endpoints: bool = True

    def __post_init__(self) -> None:
        if self.include_endpoints and self.count < 2 and self.strategy != Strategy.EXHAUSTIVE:
            raise ValueError("count must be >= 2 when endpoints are included")
        if self.strategy == Strategy.BERNOULLI and not 0.0 < self.bernoulli_p < 1.0:
            raise ValueError("bernoulli_p must be in (0,1)")


def enumerate_masks(n: int) -> list[Mask]:
    """All 2^n masks, ordered by integer value with bit j of i giving position j."""
    if n < 1:
        raise ValueError("empty instance")
    if n > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive enumeration limited to n <= {EXHAUSTIVE_LIMIT}")
    return [Mask(bits=tuple((i >> j) & 1 for j in range(n))) for i in range(2**n)]


def sample_masks(n: int, cfg: PerturbationConfig) -> list[Mask]:
    """Draw cfg.count masks for an n-token instance, deterministically per seed.

    Endpoint masks (all-ones, all-zeros) appear exactly once each when
    ``include_endpoints`` is set; sampled masks never duplicate them.  Under
    ``Exhaustive`` the full 2^n grid is returned and ``count`` is ignored.
    """
    if n < 1:
        raise ValueError("empty instance")
    if cfg.strategy == Strategy.EXHAUSTIVE:
        return enumerate_masks(n)

    prefix: list[Mask] = []
    remaining = cfg.count
    if cfg.include_endpoints:
        prefix = [Mask.ones(n), Mask.zeros(n)]
        remaining -= 2
    if n == 1:
        if remaining > 0:
            raise ValueError("n=1 admits only the two endpoint masks")
        return prefix

    rng = np.random.default_rng(cfg.seed)
    if cfg.strategy == Strategy.UNIFORM_SIZE:
        sizes = rng.integers(1, n, size=remaining)
        ranks = np.argsort(rng.random((remaining, n)), axis=1).argsort(axis=1)
        bits = (ranks < sizes[:, None]).astype(np.int8)
    else:
        bits = np.empty((0, n), dtype=np.int8)
        for _ in range(100):
            need = remaining - bits.shape[0]
            if need <= 0:
                break
            draw = (rng.random((need, n)) < cfg.bernoulli_p).astype(np.int8)
            if cfg.include_endpoints:
                active = draw.sum(axis=1)
                draw = draw[(active > 0) & (active < n)]
            bits = np.vstack([bits, draw])
        else:
            raise ValueError("could not sample interior masks; bernoulli_p too extreme")
    return prefix + [Mask(bits=tuple(int(b) for b in row)) for row in bits[:remaining]]


def apply_mask(instance: AnnotatedInstance, mask: Mask, mask_token: str = DEFAULT_MASK_TOKEN) -> list[str]:
    """Materialize the simplified input: masked positions become ``mask_token``."""
    if len(mask) != len(instance.tokens):
        raise ValueError(f"mask length {len(mask)} != token count {len(instance.tokens)}")
    return [tok.text if bit else mask_token for tok, bit in zip(instance.tokens, mask.bits)]
