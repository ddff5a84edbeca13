"""Growth-exponent and diffusion-constant extraction from density trajectories.

The local exponent nu(t) = d ln N / d ln t (centered differences on the
log-log grid) classifies the growth regimes: linear onset (nu = 1), the
sub-diffusive plateau (nu < 1/2) and the diffusive window (nu = 1/2) before
finite-size saturation.  Window selection thresholds are arguments, not
constants, since they are calibration choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dephfill.adiabatic import continuum_profile
from dephfill.trajectory import DensityTrajectory


class AnalysisError(ValueError):
    pass


@dataclass
class ExponentTrace:
    """Local growth exponent nu(t) on the trajectory's time grid."""

    times: np.ndarray
    nu: np.ndarray

    def write_csv(self, path) -> None:
        lines = ["t,nu"]
        for t, v in zip(self.times, self.nu):
            lines.append(f"{float(t)!r},{float(v)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


@dataclass
class FitReport:
    """Power-law / diffusion fit over an auto- or user-selected window."""

    ok: bool
    window: tuple[float, float] | None
    exponent: float | None
    exponent_stderr: float | None
    prefactor: float | None
    prefactor_stderr: float | None
    r_squared: float | None
    n_points: int
    message: str = ""

    def to_record(self) -> str:
        """Flat key = value text block."""
        lines = [f"ok = {str(self.ok).lower()}"]
        if self.window is not None:
            lines.append(f"window_lo = {self.window[0]!r}")
            lines.append(f"window_hi = {self.window[1]!r}")
        for key in ("exponent", "exponent_stderr", "prefactor", "prefactor_stderr",
                    "r_squared"):
            val = getattr(self, key)
            if val is not None:
                lines.append(f"{key} = {float(val)!r}")
        lines.append(f"n_points = {self.n_points}")
        if self.message:
            lines.append(f"message = {self.message}")
        return "\n".join(lines) + "\n"


def _positive_part(traj: DensityTrajectory) -> tuple[np.ndarray, np.ndarray]:
    mask = (traj.times > 0) & (traj.total_number > 0)
    return traj.times[mask], traj.total_number[mask]


def local_exponent(traj: DensityTrajectory) -> ExponentTrace:
    """nu(t) by centered differences of ln N against ln t; one-sided ends."""
    t, N = _positive_part(traj)
    if t.size < 3:
        raise AnalysisError("need at least 3 samples with t > 0 and N > 0")
    lt, lN = np.log(t), np.log(N)
    nu = np.empty_like(lt)
    nu[1:-1] = (lN[2:] - lN[:-2]) / (lt[2:] - lt[:-2])
    nu[0] = (lN[1] - lN[0]) / (lt[1] - lt[0])
    nu[-1] = (lN[-1] - lN[-2]) / (lt[-1] - lt[-2])
    return ExponentTrace(times=t, nu=nu)


def _longest_true_run(mask: np.ndarray) -> tuple[int, int] | None:
    """(start, stop) of the longest contiguous True run, stop exclusive."""
    best = None
    start = None
    for i, flag in enumerate(list(mask) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return best


def fit_diffusion_constant(
    traj: DensityTrajectory,
    L: int | None = None,
    nu_tol: float = 0.05,
    max_fill: float = 0.5,
    min_points: int = 10,
) -> FitReport:
    """Least-squares fit of N = D sqrt(t) inside the diffusive window.

    The window is the largest contiguous span where |nu(t) - 1/2| < nu_tol
    and N < max_fill * L.  The fit is single-parameter, exponent pinned to
    1/2; the report carries D as ``prefactor``.  When no window qualifies
    the report says so explicitly rather than failing silently.
    """
    if L is None:
        L = traj.L
    trace = local_exponent(traj)
    t, N = _positive_part(traj)
    mask = (np.abs(trace.nu - 0.5) < nu_tol) & (N < max_fill * L)
    run = _longest_true_run(mask)
    if run is None or run[1] - run[0] < min_points:
        got = 0 if run is None else run[1] - run[0]
        return FitReport(ok=False, window=None, exponent=None, exponent_stderr=None,
                         prefactor=None, prefactor_stderr=None, r_squared=None,
                         n_points=got,
                         message="no diffusive regime detected "
                                 f"(longest qualifying span has {got} points, "
                                 f"need {min_points})")
    sl = slice(*run)
    tw, Nw = t[sl], N[sl]
    root = np.sqrt(tw)
    D = float(root @ Nw / (root @ root))
    resid = Nw - D * root
    dof = max(tw.size - 1, 1)
    sigma2 = float(resid @ resid) / dof
    D_err = math.sqrt(sigma2 / float(root @ root))
    ss_tot = float(np.sum((Nw - Nw.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return FitReport(ok=True, window=(float(tw[0]), float(tw[-1])), exponent=0.5,
                     exponent_stderr=0.0, prefactor=D, prefactor_stderr=D_err,
                     r_squared=r2, n_points=tw.size)


def fit_power_law(
    traj: DensityTrajectory,
    window: tuple[float, float] | None = None,
    L: int | None = None,
    max_fill: float = 0.5,
    min_points: int = 10,
) -> FitReport:
    """Least-squares fit of ln N = ln c + nu ln t.

    Default window: the last decade of time with N below max_fill * L
    (pre-saturation, post-plateau).
    """
    if L is None:
        L = traj.L
    t, N = _positive_part(traj)
    if window is None:
        below = t[N < max_fill * L]
        if below.size == 0:
            return FitReport(ok=False, window=None, exponent=None,
                             exponent_stderr=None, prefactor=None,
                             prefactor_stderr=None, r_squared=None, n_points=0,
                             message="no pre-saturation samples available")
        hi = float(below[-1])
        window = (hi / 10.0, hi)
    mask = (t >= window[0]) & (t <= window[1])
    if int(mask.sum()) < min_points:
        return FitReport(ok=False, window=window, exponent=None, exponent_stderr=None,
                         prefactor=None, prefactor_stderr=None, r_squared=None,
                         n_points=int(mask.sum()),
                         message=f"window holds {int(mask.sum())} points, "
                                 f"need {min_points}")
    lt, lN = np.log(t[mask]), np.log(N[mask])
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, res, _, _ = np.linalg.lstsq(A, lN, rcond=None)
    nu, lnc = float(coef[0]), float(coef[1])
    fitted = A @ coef
    resid = lN - fitted
    dof = max(lt.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    ss_tot = float(np.sum((lN - lN.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    c = math.exp(lnc)
    return FitReport(ok=True, window=(float(t[mask][0]), float(t[mask][-1])),
                     exponent=nu, exponent_stderr=math.sqrt(cov[0, 0]),
                     prefactor=c, prefactor_stderr=c * math.sqrt(cov[1, 1]),
                     r_squared=r2, n_points=lt.size)


@dataclass
class CollapseReport:
    """Quality of the diffusive self-similar collapse n_i(t) vs x = i/sqrt(t)."""

    max_pairwise: float
    vs_profile: float | None
    times: tuple[float, ...]


def collapse_error(
    traj: DensityTrajectory,
    times,
    alpha1: float | None = None,
    grid_points: int = 200,
) -> CollapseReport:
    """RMS spread of rescaled density snapshots, optionally vs the erf form.

    Each snapshot's site axis (1-based coordinate i) is rescaled by
    1/sqrt(t); snapshots are interpolated onto a common x grid covering
    their overlap and compared pairwise by the RMS (L2) deviation.  With
    ``alpha1`` given, the deviation of every snapshot from the closed-form
    profile 1 - erf(x / sqrt(4 alpha1 t)) is also returned (worst case).
    """
    wanted = np.atleast_1d(np.asarray(times, dtype=float))
    if wanted.size < 2 and alpha1 is None:
        raise AnalysisError("need at least two snapshot times for a pairwise collapse")
    snaps = []
    for t in wanted:
        t_actual, profile = traj.snapshot(float(t))
        if not np.isclose(t_actual, t, rtol=0.05, atol=0):
            raise AnalysisError(
                f"snapshot time {t:g} not in stored grid (closest is {t_actual:g})")
        if t_actual <= 0:
            raise AnalysisError("collapse snapshots need t > 0")
        x = np.arange(1, traj.L + 1) / math.sqrt(t_actual)
        snaps.append((t_actual, x, profile))
    x_lo = max(s[1][0] for s in snaps)
    x_hi = min(s[1][-1] for s in snaps)
    if x_hi <= x_lo:
        raise AnalysisError("snapshots do not overlap after rescaling")
    grid = np.linspace(x_lo, x_hi, grid_points)
    interp = [np.interp(grid, x, p) for _, x, p in snaps]
    max_pair = 0.0
    for a in range(len(interp)):
        for b in range(a + 1, len(interp)):
            dev = float(np.sqrt(np.mean((interp[a] - interp[b]) ** 2)))
            max_pair = max(max_pair, dev)
    vs_profile = None
    if alpha1 is not None:
        worst = 0.0
        for (t_actual, x, profile) in snaps:
            ref = continuum_profile(x * math.sqrt(t_actual), t_actual, alpha1)
            worst = max(worst, float(np.sqrt(np.mean((profile - ref) ** 2))))
        vs_profile = worst
    return CollapseReport(max_pairwise=max_pair, vs_profile=vs_profile,
                          times=tuple(s[0] for s in snaps))
