"""Chain trace container shared by all samplers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ChainTrace"]


@dataclass
class ChainTrace:
    """Recorded post-burn-in samples plus bookkeeping.

    ``n_value``/``n_gradient``/``n_hessian`` are cumulative counters at the
    time each sample was recorded (burn-in cost included in the running
    totals, so the arrays are monotone).  ``meta`` echoes sampler id, seed
    and config.
    """

    samples: np.ndarray
    accepted: np.ndarray
    n_value: np.ndarray
    n_gradient: np.ndarray
    n_hessian: np.ndarray
    wall_time: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        n = self.samples.shape[0]
        for name in ("accepted", "n_value", "n_gradient", "n_hessian"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per recorded step")
            setattr(self, name, arr)

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def acceptance_rate(self) -> float:
        if self.n_steps == 0:
            return float("nan")
        return float(np.mean(self.accepted))

    def total_cost(self) -> dict:
        """Final cumulative evaluation counters."""
        if self.n_steps == 0:
            keys = ("n_value", "n_gradient", "n_hessian")
            return {k: int(self.meta.get("final_cost", {}).get(k, 0)) for k in keys}
        return {
            "n_value": int(self.n_value[-1]),
            "n_gradient": int(self.n_gradient[-1]),
            "n_hessian": int(self.n_hessian[-1]),
        }
