from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from ..kernel import ConfigError

DESIGNS = ("gray", "pausible", "selftimed", "stari", "unsafe-binary")

# designs driven edge-by-edge by two clock domains
CLOCKED_DESIGNS = ("gray", "pausible", "unsafe-binary")


class CorruptWord(NamedTuple):
    """What a read port yields for a slot that holds no unread word."""

    slot: int


@dataclass(frozen=True)
class FifoConfig:
    design: str = "gray"
    depth: int = 8
    word_width: int = 32
    sync_stages: int = 2
    credit_pairs: int = 2
    stage_forward: int = 50
    stage_backward: int = 50

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"design must be one of {', '.join(DESIGNS)}; got {self.design!r}")
        if self.depth < 2 or self.depth & (self.depth - 1):
            raise ConfigError(f"depth must be a power of two >= 2, got {self.depth}")
        if self.word_width < 1:
            raise ConfigError("word_width must be >= 1")
        if self.sync_stages < 2:
            raise ConfigError("sync_stages must be >= 2")
        if not 1 <= self.credit_pairs <= self.depth:
            raise ConfigError("credit_pairs must satisfy 1 <= credit_pairs <= depth")
        if self.stage_forward < 1 or self.stage_backward < 1:
            raise ConfigError("self-timed stage delays must be >= 1 ps")
