"""Kerr bistability: mean-field branches, drive sweeps and data collapse.

The mean-field photon number n = |alpha|^2 of the driven Kerr mode solves

    eps^2 = n [ kappa^2 + (Delta + n u)^2 ],

a cubic in n with one or three non-negative roots.  For Delta < 0 and
Delta^2 > 3 kappa^2 the response is S-shaped; the turning points sit at

    n_pm = (-2 Delta pm sqrt(Delta^2 - 3 kappa^2)) / (3u)

and the drive values eps(n_pm) delimit the bistable window.  Note the
upper turning point carries the lower drive: eps(n_minus) > eps(n_plus).

``sweep`` computes one steady-state entropy budget per (N, eps) point,
with Fock cutoff and quadrature grid auto-selected per point, and
``collapse_transform`` rescales the resulting curves onto the finite-size
coordinate x = N (eps/eps_c - 1).
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverConvergenceError
from .fock_algebra import mean_photon_number
from .liouvillian import (
    KerrParams,
    build_kerr_liouvillian,
    liouvillian_gap,
    steady_state,
)
from .phase_space import EntropyBudget, auto_grid, entropy_budget

log = logging.getLogger(__name__)

CUTOFF_C1 = 1.5
CUTOFF_C2 = 5.0
CUTOFF_FLOOR = 8
CUTOFF_DRIFT_TOL = 1e-8


# ---------------------------------------------------------------------------
# Mean field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BistabilityWindow:
    """Turning points of the S-shaped mean-field response.

    ``eps_minus`` is the drive at the lower turning point n_minus,
    ``eps_plus`` the drive at the upper turning point n_plus; numerically
    eps_minus > eps_plus, so the bistable drive interval is
    (eps_lo, eps_hi) = (eps_plus, eps_minus).
    """

    n_minus: float
    n_plus: float
    eps_minus: float
    eps_plus: float

    @property
    def eps_lo(self) -> float:
        return min(self.eps_minus, self.eps_plus)

    @property
    def eps_hi(self) -> float:
        return max(self.eps_minus, self.eps_plus)


def drive_at(p: KerrParams, n: float) -> float:
    """Drive amplitude on the mean-field curve, eps(n)."""
    return math.sqrt(n * (p.kappa ** 2 + (p.delta + n * p.u) ** 2))


def bistability_window(p: KerrParams) -> BistabilityWindow | None:
    """Bistable window, or None when the response is single-valued."""
    disc = p.delta ** 2 - 3.0 * p.kappa ** 2
    if p.delta >= 0 or disc < -1e-12 * max(p.delta ** 2, 1.0):
        return None
    root = math.sqrt(max(disc, 0.0))
    n_minus = (-2.0 * p.delta - root) / (3.0 * p.u)
    n_plus = (-2.0 * p.delta + root) / (3.0 * p.u)
    return BistabilityWindow(
        n_minus=n_minus,
        n_plus=n_plus,
        eps_minus=drive_at(p, n_minus),
        eps_plus=drive_at(p, n_plus),
    )


def mean_field_curve(p: KerrParams, eps: float) -> list[float]:
    """All real non-negative mean-field photon numbers at the given drive.

    Roots of the cubic u^2 n^3 + 2 Delta u n^2 + (Delta^2 + kappa^2) n = eps^2,
    Newton-polished and sorted ascending; one or three values.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    coeffs = [p.u ** 2, 2.0 * p.delta * p.u, p.delta ** 2 + p.kappa ** 2, -eps ** 2]
    roots = np.roots(coeffs)
    scale = max(1.0, eps ** 2)
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)):
            continue
        n = float(r.real)
        if n < -1e-12:
            continue
        n = max(n, 0.0)
        for _ in range(40):  # Newton polish
            f = n * (p.kappa ** 2 + (p.delta + n * p.u) ** 2) - eps ** 2
            df = p.kappa ** 2 + (p.delta + n * p.u) ** 2 + 2.0 * n * p.u * (
                p.delta + n * p.u
            )
            if df == 0:
                break
            step = f / df
            n -= step
            if abs(step) < 1e-15 * max(1.0, abs(n)):
                break
        resid = abs(n * (p.kappa ** 2 + (p.delta + n * p.u) ** 2) - eps ** 2)
        if resid > 1e-10 * scale:
            log.warning("mean-field root %.6g has residual %.3e", n, resid)
        out.append(max(n, 0.0))
    return sorted(out)


def recommended_cutoff(
    p: KerrParams,
    c1: float = CUTOFF_C1,
    c2: float = CUTOFF_C2,
    floor: int = CUTOFF_FLOOR,
) -> int:
    """Fock cutoff n_max = ceil(c1 N n_ref + c2 sqrt(N n_ref)).

    The steady state concentrates near photon number N * n with n on the
    mean-field curve; the sqrt buffer absorbs quantum fluctuations.  Inside
    (and just below) the bistable window the upper branch sets the scale.
    """
    roots = mean_field_curve(p, p.eps)
    n_ref = max(roots) if roots else 0.0
    win = bistability_window(p)
    if win is not None and p.eps >= 0.95 * win.eps_lo:
        n_ref = max(n_ref, win.n_plus)
    n_int = p.N * n_ref
    return max(floor, int(math.ceil(c1 * n_int + c2 * math.sqrt(n_int))))


# ---------------------------------------------------------------------------
# Certified steady states and sweeps
# ---------------------------------------------------------------------------

def steady_state_certified(
    p: KerrParams,
    n_max: int | None = None,
    drift_tol: float = CUTOFF_DRIFT_TOL,
    max_escalations: int = 3,
):
    """Solve at n_max and n_max + 10 until <a^dag a> stops moving.

    Returns (rho, L, n_max_used, drift).  Escalates the cutoff by 10 while
    the observable drift exceeds ``drift_tol``.
    """
    n = recommended_cutoff(p) if n_max is None else n_max
    L = build_kerr_liouvillian(p, n, enforce_cutoff=n_max is None)
    rho = steady_state(L)
    for _ in range(max_escalations + 1):
        L_big = build_kerr_liouvillian(p, n + 10, enforce_cutoff=False)
        rho_big = steady_state(L_big)
        drift = abs(mean_photon_number(rho) - mean_photon_number(rho_big))
        if drift < drift_tol:
            return rho, L, n, drift
        n, L, rho = n + 10, L_big, rho_big
    raise SolverConvergenceError(
        f"cutoff escalation exhausted at n_max = {n}, drift {drift:.3e}"
    )


@dataclass(frozen=True)
class SweepRecord:
    """One steady-state point of a drive sweep."""

    N: int
    eps: float
    budget: EntropyBudget
    gap: float
    n_mean: float
    n_max_used: int
    grid_center: complex
    grid_half_width: float
    grid_points: int
    ness_residual: float
    cutoff_drift: float
    wall_time_s: float = 0.0


@dataclass
class SweepResult:
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (N, eps, message)


_SWEEP_DEFAULTS = {
    "points_per_axis": 128,
    "certify": False,
    "compute_gap": True,
    "timing": False,
    "n_max": None,
    "mass_tol": None,
    "balance_tol": None,
    "q_floor_ratio": None,
}


def _sweep_point(args) -> SweepRecord:
    import time

    from .phase_space import BALANCE_TOL, MASS_TOL, Q_FLOOR_RATIO

    p_base, N, eps, opts = args
    start = time.perf_counter()
    p = p_base.with_drive(eps, N)
    if opts["certify"]:
        rho, L, n_used, drift = steady_state_certified(p, n_max=opts["n_max"])
    else:
        n_used = opts["n_max"] or recommended_cutoff(p)
        L = build_kerr_liouvillian(p, n_used, enforce_cutoff=opts["n_max"] is None)
        rho = steady_state(L)
        drift = float("nan")
    grid = auto_grid(rho, points_per_axis=opts["points_per_axis"])
    budget = entropy_budget(
        rho, p, grid,
        mass_tol=opts["mass_tol"] or MASS_TOL,
        balance_tol=opts["balance_tol"] or BALANCE_TOL,
        q_floor_ratio=opts["q_floor_ratio"] or Q_FLOOR_RATIO,
    )
    gap = liouvillian_gap(L) if opts["compute_gap"] else float("nan")
    return SweepRecord(
        N=N,
        eps=eps,
        budget=budget,
        gap=gap,
        n_mean=mean_photon_number(rho) / N,
        n_max_used=n_used,
        grid_center=grid.center,
        grid_half_width=grid.half_width,
        grid_points=grid.points_per_axis,
        ness_residual=L.residual(rho),
        cutoff_drift=drift,
        wall_time_s=(time.perf_counter() - start) if opts["timing"] else 0.0,
    )


def sweep(
    p_base: KerrParams,
    N_list,
    eps_grid,
    on_record=None,
    threads: int = 1,
    **options,
) -> SweepResult:
    """Steady-state budgets over a (N, eps) product grid.

    Points are independent jobs; failures are recorded and the sweep
    continues.  Records come back sorted by (N, eps) regardless of the
    executor, so output is deterministic for any thread count (per-point
    wall time is only recorded when ``timing`` is set).  Recognized
    options (see ``_SWEEP_DEFAULTS``): points_per_axis, certify,
    compute_gap, timing, and the per-point overrides n_max, mass_tol,
    balance_tol, q_floor_ratio.
    """
    unknown = set(options) - set(_SWEEP_DEFAULTS)
    if unknown:
        raise TypeError(f"unknown sweep option(s) {sorted(unknown)}")
    opts = dict(_SWEEP_DEFAULTS)
    opts.update(options)
    win = bistability_window(p_base)
    if win is not None:
        lo, hi = 0.5 * win.eps_lo, 1.5 * win.eps_hi
        outside = [e for e in eps_grid if not lo <= e <= hi]
        if outside:
            warnings.warn(
                f"{len(outside)} drive values outside [{lo:.4g}, {hi:.4g}]; "
                "cutoffs may be generous there",
                stacklevel=2,
            )
    jobs = [
        (p_base, int(N), float(eps), opts)
        for N in N_list
        for eps in eps_grid
    ]
    result = SweepResult()

    def _handle(job, outcome, error=None):
        if error is None:
            result.records.append(outcome)
            if on_record is not None:
                on_record(outcome)
        else:
            log.warning("sweep point N=%s eps=%.6g failed: %s", job[1], job[2], error)
            result.failures.append((job[1], job[2], str(error)))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(job, pool.submit(_sweep_point, job)) for job in jobs]
            for job, fut in futures:
                try:
                    _handle(job, fut.result())
                except Exception as exc:  # per-point failure, sweep continues
                    _handle(job, None, exc)
    else:
        for job in jobs:
            try:
                _handle(job, _sweep_point(job))
            except Exception as exc:  # per-point failure, sweep continues
                _handle(job, None, exc)
    result.records.sort(key=lambda r: (r.N, r.eps))
    result.failures.sort(key=lambda f: (f[0], f[1]))
    return result


# ---------------------------------------------------------------------------
# Critical-drive estimate and data collapse
# ---------------------------------------------------------------------------

def estimate_eps_c(records, method: str = "gap") -> float:
    """Transition drive from the largest-N curve of a sweep.

    method="gap":   drive minimizing the spectral gap (parabolic refinement
                    of the grid minimum);
    method="slope": drive maximizing d<n>/d eps (finite differences).
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    n_big = max(r.N for r in records)
    rows = sorted((r for r in records if r.N == n_big), key=lambda r: r.eps)
    eps = np.array([r.eps for r in rows])
    if method == "gap":
        y = np.array([r.gap for r in rows])
        if np.any(~np.isfinite(y)):
            raise ValueError("gap values missing; rerun sweep with compute_gap=True")
        return _refine_extremum(eps, y, minimum=True)
    if method == "slope":
        n = np.array([r.n_mean for r in rows])
        de = np.gradient(n, eps)
        return _refine_extremum(eps, -np.abs(de), minimum=True)
    raise ValueError(f"unknown method {method!r}")


def extrapolate_eps_c(records) -> float:
    """Thermodynamic transition drive from per-size gap minima.

    The drive minimizing the gap drifts with size like eps_c + b/N, as does
    the peak of the order-parameter susceptibility; fitting the refined
    per-N minima against 1/N and taking the intercept removes the leading
    finite-size offset.  Requires gap data for at least two sizes.
    """
    by_n = {}
    for r in records:
        if np.isfinite(r.gap):
            by_n.setdefault(r.N, []).append(r)
    if len(by_n) < 2:
        raise ValueError("need gap curves for at least two sizes")
    sizes = np.array(sorted(by_n), dtype=float)
    minima = []
    for n in sizes:
        rows = sorted(by_n[int(n)], key=lambda r: r.eps)
        eps = np.array([r.eps for r in rows])
        gaps = np.array([r.gap for r in rows])
        minima.append(_refine_extremum(eps, gaps, minimum=True))
    coeffs = np.polyfit(1.0 / sizes, minima, 1)
    return float(coeffs[1])


def _refine_extremum(x: np.ndarray, y: np.ndarray, minimum: bool) -> float:
    idx = int(np.argmin(y) if minimum else np.argmax(y))
    if idx == 0 or idx == len(x) - 1:
        return float(x[idx])
    x0, x1, x2 = x[idx - 1 : idx + 2]
    y0, y1, y2 = y[idx - 1 : idx + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denom
    if a == 0:
        return float(x1)
    vertex = -b / (2 * a)
    return float(np.clip(vertex, x0, x2))


@dataclass(frozen=True)
class CollapsePoint:
    N: int
    eps: float
    Pi_u: float
    Pi_d: float


def to_collapse_points(records) -> list[CollapsePoint]:
    return [
        CollapsePoint(r.N, r.eps, r.budget.Pi_u, r.budget.Pi_d) for r in records
    ]


@dataclass(frozen=True)
class CollapseResult:
    """Rescaled sweep curves and their pairwise collapse quality.

    ``rows`` hold (x, Pi_u, Pi_d/N, N) with x = N (eps/eps_c - 1).
    ``metrics`` maps consecutive size pairs to the peak-normalized maximum
    vertical spread per quantity, or None when x-ranges do not overlap.
    """

    eps_c: float
    rows: list
    metrics: dict

    def headline(self) -> dict | None:
        """Spread between the two largest sizes."""
        if not self.metrics:
            return None
        pair = max(self.metrics, key=lambda t: t[1])
        return self.metrics[pair]


def collapse_transform(points, eps_c: float) -> CollapseResult:
    points = sorted(points, key=lambda r: (r.N, r.eps))
    if eps_c <= 0:
        raise ValueError("eps_c must be positive")
    rows = [
        (p.N * (p.eps / eps_c - 1.0), p.Pi_u, p.Pi_d / p.N, p.N) for p in points
    ]
    by_n = {}
    for x, piu, pidn, n in rows:
        by_n.setdefault(n, []).append((x, piu, pidn))
    sizes = sorted(by_n)
    metrics = {}
    for n1, n2 in zip(sizes, sizes[1:]):
        metrics[(n1, n2)] = _pair_spread(by_n[n1], by_n[n2])
    return CollapseResult(eps_c=eps_c, rows=rows, metrics=metrics)


def _pair_spread(curve1, curve2, samples: int = 201):
    c1 = np.array(sorted(curve1))
    c2 = np.array(sorted(curve2))
    lo = max(c1[0, 0], c2[0, 0])
    hi = min(c1[-1, 0], c2[-1, 0])
    if hi <= lo:
        return None
    xs = np.linspace(lo, hi, samples)
    out = {}
    for col, name in ((1, "Pi_u"), (2, "Pi_d_over_N")):
        y1 = np.interp(xs, c1[:, 0], c1[:, col])
        y2 = np.interp(xs, c2[:, 0], c2[:, col])
        peak = max(np.max(np.abs(y1)), np.max(np.abs(y2)), 1e-300)
        out[name] = float(np.max(np.abs(y1 - y2)) / peak)
    return out
