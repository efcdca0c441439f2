"""Seeded stream derivation.

Every random stream is keyed by ``(base_seed, stream_id)`` through
:class:`numpy.random.SeedSequence`, so a trial's draws never depend on
which worker runs it or in what order trials are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# sub-stream tags
SOLVER = 0
INIT = 1
QP_MATRIX = 2
VERIFY = 3


@dataclass(frozen=True)
class RngContract:
    base_seed: int

    def stream(self, *stream_id: int) -> np.random.Generator:
        """Fresh generator for ``stream_id``; identical ids give identical draws."""
        if any(int(s) < 0 for s in stream_id):
            raise ValueError(f"stream ids must be nonnegative, got {stream_id}")
        seq = np.random.SeedSequence(
            int(self.base_seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=tuple(int(s) for s in stream_id),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def trial_stream(self, trial: int, series: int) -> np.random.Generator:
        return self.stream(trial, SOLVER, series)

    def init_stream(self, trial: int, dim: int = 1) -> np.random.Generator:
        return self.stream(trial, INIT, dim)
