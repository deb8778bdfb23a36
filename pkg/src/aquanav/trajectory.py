"""Timestamped pose sequences produced by the estimators and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryEstimate:
    """Per-timestamp attitude, velocity, position and (optionally) covariance.

    ``source`` names the producer: ``inekf``, ``ekf``, ``deadreckon`` or
    ``truth``.
    """

    t: np.ndarray
    R: np.ndarray
    v: np.ndarray
    p: np.ndarray
    P: np.ndarray | None = None
    source: str = ""
    events: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @classmethod
    def empty(cls, source: str = "") -> TrajectoryEstimate:
        return cls(np.zeros(0), np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
                   np.zeros((0, 9, 9)), source)

    @classmethod
    def from_lists(cls, t, R, v, p, P=None, source="", events=None) -> TrajectoryEstimate:
        if not t:
            out = cls.empty(source)
            out.events = dict(events or {})
            return out
        return cls(
            np.asarray(t, dtype=float),
            np.asarray(R, dtype=float),
            np.asarray(v, dtype=float),
            np.asarray(p, dtype=float),
            None if P is None else np.asarray(P, dtype=float),
            source,
            dict(events or {}),
        )

    def nearest_index(self, times, tol: float) -> tuple[np.ndarray, np.ndarray]:
        """Index of the nearest sample for each query time and a within-``tol`` mask."""
        times = np.asarray(times, dtype=float)
        if len(self.t) == 0:
            return np.zeros(len(times), dtype=int), np.zeros(len(times), dtype=bool)
        j = np.clip(np.searchsorted(self.t, times), 1, max(len(self.t) - 1, 1))
        left = np.clip(j - 1, 0, len(self.t) - 1)
        right = np.clip(j, 0, len(self.t) - 1)
        pick = np.where(np.abs(self.t[left] - times) <= np.abs(self.t[right] - times), left, right)
        ok = np.abs(self.t[pick] - times) <= tol
        return pick, ok
