"""Density trajectories: the universal output record of every engine.

CSV schema: header ``t,N,n_1,...,n_L``, one row per sampled time, floats
written with shortest round-trip precision so identical runs produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TrajectoryError(ValueError):
    """Malformed trajectory data or CSV file."""


@dataclass
class DensityTrajectory:
    """Time grid plus per-site density n_i(t) and total particle number N(t)."""

    times: np.ndarray
    site_density: np.ndarray  # shape (n_times, L)
    total_number: np.ndarray

    @classmethod
    def from_site_density(cls, times, site_density) -> "DensityTrajectory":
        times = np.asarray(times, dtype=float)
        site_density = np.asarray(site_density, dtype=float)
        if site_density.ndim != 2 or site_density.shape[0] != times.size:
            raise TrajectoryError(
                f"site_density shape {site_density.shape} does not match "
                f"{times.size} sample times"
            )
        return cls(times=times, site_density=site_density,
                   total_number=site_density.sum(axis=1))

    @property
    def L(self) -> int:
        return self.site_density.shape[1]

    def snapshot(self, t: float) -> tuple[float, np.ndarray]:
        """Stored time closest to ``t`` and its density profile."""
        k = int(np.argmin(np.abs(self.times - t)))
        return float(self.times[k]), self.site_density[k]

    def write_csv(self, path) -> None:
        path = Path(path)
        L = self.L
        header = "t,N," + ",".join(f"n_{i}" for i in range(1, L + 1))
        lines = [header]
        for k in range(self.times.size):
            row = [self.times[k], self.total_number[k], *self.site_density[k]]
            lines.append(",".join(repr(float(v)) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    @classmethod
    def read_csv(cls, path) -> "DensityTrajectory":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise TrajectoryError(f"{path}: empty trajectory file")
        header = lines[0].split(",")
        if len(header) < 3 or header[0] != "t" or header[1] != "N":
            raise TrajectoryError(f"{path}: bad header {lines[0]!r}")
        L = len(header) - 2
        expected = ["t", "N"] + [f"n_{i}" for i in range(1, L + 1)]
        if header != expected:
            raise TrajectoryError(f"{path}: header columns do not match t,N,n_1..n_{L}")
        times = np.empty(len(lines) - 1)
        dens = np.empty((len(lines) - 1, L))
        totals = np.empty(len(lines) - 1)
        for r, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != L + 2:
                raise TrajectoryError(
                    f"{path}: row {r} has {len(parts)} columns, expected {L + 2}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                bad = next(i for i, p in enumerate(parts) if not _is_float(p))
                raise TrajectoryError(
                    f"{path}: row {r}, column {bad + 1}: not a number: {parts[bad]!r}"
                ) from exc
            times[r - 2] = vals[0]
            totals[r - 2] = vals[1]
            dens[r - 2] = vals[2:]
        return cls(times=times, site_density=dens, total_number=totals)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def make_time_grid(t_max: float, n_points: int = 200, kind: str = "log",
                   t_min: float | None = None) -> np.ndarray:
    """Ascending sample grid starting at 0.

    ``log`` spacing (the default) resolves every growth regime of a long run
    in one pass; ``linear`` is available for short runs.
    """
    if t_max <= 0:
        raise TrajectoryError(f"t_max must be > 0, got {t_max}")
    if n_points < 2:
        raise TrajectoryError(f"need at least 2 grid points, got {n_points}")
    if kind == "linear":
        return np.linspace(0.0, t_max, n_points)
    if kind == "log":
        if t_min is None:
            t_min = t_max * 1e-4
        if not 0 < t_min < t_max:
            raise TrajectoryError(f"need 0 < t_min < t_max, got t_min={t_min}")
        return np.concatenate([[0.0], np.geomspace(t_min, t_max, n_points - 1)])
    raise TrajectoryError(f"unknown grid kind {kind!r}")
