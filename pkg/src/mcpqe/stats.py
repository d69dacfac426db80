"""Reblocking (pair-averaging) error analysis for serially correlated samples."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

MIN_SAMPLES = 16


@dataclass(frozen=True)
class BlockLevel:
    block_size: int
    n_blocks: int
    mean: float
    stderr: float
    stderr_error: float


@dataclass(frozen=True)
class ReblockResult:
    levels: tuple[BlockLevel, ...]
    chosen: int

    @property
    def mean(self) -> float:
        return self.levels[self.chosen].mean

    @property
    def stderr(self) -> float:
        return self.levels[self.chosen].stderr

    @property
    def naive_stderr(self) -> float:
        return self.levels[0].stderr

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "block_size", "n_blocks", "mean", "stderr", "stderr_error", "chosen"])
        for k, lv in enumerate(self.levels):
            w.writerow([k, lv.block_size, lv.n_blocks, repr(lv.mean), repr(lv.stderr),
                        repr(lv.stderr_error), int(k == self.chosen)])
        return buf.getvalue()


def reblock(series, discard: int = 0) -> ReblockResult:
    """Pair-average repeatedly; pick the first level whose stderr agrees with the next.

    At each level stderr = sqrt(var / (n_blocks - 1)) (population variance of
    the block means) and its error is stderr / sqrt(2 (n_blocks - 1)). The
    chosen level is the first k with |stderr_{k+1} - stderr_k| < error_k; if
    no level qualifies, the last level with at least two blocks is used.
    """
    x = np.asarray(series, dtype=float)[discard:]
    if x.size < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples after discarding, got {x.size}")
    levels = []
    size = 1
    while x.size >= 2:
        n = x.size
        se = float(np.sqrt(x.var() / (n - 1)))
        levels.append(BlockLevel(size, n, float(x.mean()), se, float(se / np.sqrt(2.0 * (n - 1)))))
        if n % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
        size *= 2
    chosen = len(levels) - 1
    for k in range(len(levels) - 1):
        if abs(levels[k + 1].stderr - levels[k].stderr) < levels[k].stderr_error:
            chosen = k
            break
    return ReblockResult(tuple(levels), chosen)
