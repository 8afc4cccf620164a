"""Time-series container shared by all engines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    states: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = len(self.times)
        for name, series in self.observables.items():
            series = np.asarray(series)
            if len(series) != n:
                raise ValueError(f"series {name!r} has length {len(series)}, expected {n}")
            self.observables[name] = series
        if self.states is not None and len(self.states) != n:
            raise ValueError("states and times differ in length")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]

    def peak(self, name: str = "concurrence") -> tuple[float, float]:
        """(time, value) of the global maximum."""
        k = int(np.argmax(self.observables[name]))
        return float(self.times[k]), float(self.observables[name][k])

    def first_peak(self, name: str = "concurrence", rel_height: float = 0.5) -> tuple[float, float]:
        k = first_peak_index(self.observables[name], rel_height)
        return float(self.times[k]), float(self.observables[name][k])


def first_peak_index(values, rel_height: float = 0.5) -> int:
    """Index of the first local maximum reaching ``rel_height`` of the global max.

    Tiny early wiggles are skipped by the height filter; a monotone series
    falls back to its global maximum.
    """
    v = np.asarray(values, dtype=float)
    top = v.max(initial=0.0)
    if top <= 0:
        return int(np.argmax(v))
    for k in range(1, len(v) - 1):
        if v[k] >= v[k - 1] and v[k] > v[k + 1] and v[k] >= rel_height * top:
            return k
    return int(np.argmax(v))
