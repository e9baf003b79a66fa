"""Tuning-parameter bounds, the log-spaced grid and majority-vote selection of k."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .baselines import EstimateReport
from .errors import DegenerateBound, DegenerateSpectrum, DomainError, EmptyTally, RangeError
from .ppca import SigmaProfile, _check_k, penalized_surface, profile_loglik_path

DENOM_TOL = 1e-14
# bound numerators below this are tied-tail round-off, not signal
ZERO_NUMERATOR = 1e-12
FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class DeltaBounds:
    k: int
    u_a: Optional[float]
    u_b: Optional[float]
    a_exact: Optional[float] = None
    b_exact: Optional[float] = None


@dataclass(frozen=True)
class VoteTally:
    """Per-k vote counts over a grid; `winners[t]` is 0 for a skipped point."""

    counts: dict
    grid: np.ndarray
    skipped: tuple
    winners: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return len(self.grid)


# ---------------------------------------------------------------------------
# closed-form bounds

def _u_b_parts(sp: SigmaProfile, k: int):
    n, lam, s2 = sp.n, sp.eigenvalues, sp.sigma2_hat
    if lam[k - 1] <= 0 or s2[k - 1] <= 0 or s2[k] <= 0:
        return math.nan, math.nan
    num = math.log(lam[k - 1] / s2[k - 1]) + (n - k) * math.log(s2[k] / s2[k - 1])
    den = n * (k * math.log(s2[k]) - (k - 1) * math.log(s2[k - 1]))
    return num, den


def _u_a_parts(sp: SigmaProfile, k: int):
    n, lam, s2 = sp.n, sp.eigenvalues, sp.sigma2_hat
    if lam[k] <= 0 or s2[k] <= 0 or s2[k + 1] <= 0:
        return math.nan, math.nan
    num = -(math.log(lam[k] / s2[k]) + (n - k - 1) * math.log(s2[k] / s2[k + 1]))
    den = n * ((k + 1) * math.log(s2[k + 1]) - k * math.log(s2[k]))
    return num, den


def _ratio(num, den, what):
    if not math.isfinite(num) or not math.isfinite(den) or abs(den) < DENOM_TOL:
        raise DegenerateBound(f"{what}: zero or undefined denominator")
    u = num / den
    if not math.isfinite(u) or u <= 0:
        raise DegenerateBound(f"{what} = {u:.6g} is not positive")
    return u


def bound_u_b(sp: SigmaProfile, k: int) -> float:
    """Closed-form lower bound on the upper end b_k of the interval where k wins.

    Root of the linearized difference l_p(k; d) - l_p(k-1; d):
    [log(lam_k / s2(k-1)) + (n-k) log(s2(k) / s2(k-1))] / (n [k log s2(k) - (k-1) log s2(k-1)]).
    """
    k = _check_k(sp, k)
    return _ratio(*_u_b_parts(sp, k), f"u_b({k})")


def bound_u_a(sp: SigmaProfile, k: int) -> float:
    """Closed-form upper bound on the lower end a_k of the interval where k wins.

    Shares its denominator with u_b(k+1).
    """
    k = _check_k(sp, k, 1, sp.n - 2)
    return _ratio(*_u_a_parts(sp, k), f"u_a({k})")


def delta_bounds(sp: SigmaProfile, k: int, m: Optional[int] = None) -> DeltaBounds:
    """Bounds for one k with degenerate values as None; exact roots when m is given."""
    def safe(fn, *a):
        try:
            return fn(sp, *a)
        except (DegenerateBound, RangeError):
            return None
    u_a = safe(bound_u_a, k) if k <= sp.n - 2 else None
    u_b = safe(bound_u_b, k)
    a = b = None
    if m is not None and 2 <= k <= sp.n - 2:
        iv = exact_delta_interval(sp, m, k)
        if iv is not None:
            a, b = iv
    return DeltaBounds(k, u_a, u_b, a, b)


# ---------------------------------------------------------------------------
# grid

def grid_range(sp: SigmaProfile):
    """(lo, hi) of the default grid.

    hi is u_b(1). lo is the smallest positive u_a(k); a u_a that is zero up to
    round-off (exactly tied tail eigenvalues) pulls lo down to the floor
    1e-6 * u_b(1), as does the absence of any positive u_a.
    """
    try:
        hi = bound_u_b(sp, 1)
    except DegenerateBound as exc:
        raise DegenerateSpectrum(f"u_b(1) unusable: {exc}") from exc
    floor = FLOOR_FRACTION * hi
    positive, tied = [], False
    for k in range(1, sp.n - 1):
        num, den = _u_a_parts(sp, k)
        if not (math.isfinite(num) and math.isfinite(den)) or abs(den) < DENOM_TOL:
            continue
        if abs(num) <= ZERO_NUMERATOR:
            tied = True
        elif num / den > 0:
            positive.append(num / den)
    lo = floor if tied or not positive else min(positive)
    if not lo < hi:
        raise DegenerateSpectrum(f"grid range is empty: lo={lo:.6g} >= hi={hi:.6g}")
    return lo, hi


def build_grid(sp: SigmaProfile, T: Optional[int] = None) -> np.ndarray:
    """T log-equidistant delta_tilde values from the grid range; T defaults to 50 n."""
    T = 50 * sp.n if T is None else int(T)
    if T < 1:
        raise RangeError("T must be positive")
    lo, hi = grid_range(sp)
    return geometric_grid(lo, hi, T)


def geometric_grid(lo: float, hi: float, T: int) -> np.ndarray:
    if T == 1:
        return np.array([hi])
    return np.geomspace(lo, hi, T)


def admissible_k_max(n: int, delta_tilde: float) -> int:
    """Largest k in 1..n-1 with delta_tilde < 1/k - 1/n, or 0."""
    if not delta_tilde > 0:
        return n - 1
    k = min(n - 1, math.ceil(n / (1.0 + n * delta_tilde)) - 1)
    # settle rounding at the boundary using the same test as the likelihood
    while k >= 1 and (n - k) - n * k * delta_tilde <= 0:
        k -= 1
    while k + 1 <= n - 1 and (n - k - 1) - n * (k + 1) * delta_tilde > 0:
        k += 1
    return max(k, 0)


def existence_limit(sp: SigmaProfile) -> np.ndarray:
    """Right end of G(k) = (0, (1/(k+1) - 1/n)(1 - s2(k))) for k = 1..n-1."""
    n = sp.n
    k = np.arange(1, n)
    return (1.0 / (k + 1) - 1.0 / n) * (1.0 - sp.sigma2_hat[1:])


# ---------------------------------------------------------------------------
# voting

def vote(sp: SigmaProfile, m: int, grid, restrict_to_existence: bool = True) -> VoteTally:
    """Tally the maximizing k of l_p(k; d) at every grid value.

    Candidates at each d are k <= admissible_k_max(n, d); by default they are
    further limited to the k whose existence range G(k) contains d. Ties go
    to the smaller k.
    """
    grid = np.asarray(grid, dtype=float)
    V = penalized_surface(sp, m, grid)
    n = sp.n
    k = np.arange(1, n)
    admissible = (n - k)[None, :] - n * k[None, :] * grid[:, None] > 0
    if restrict_to_existence:
        admissible &= grid[:, None] < existence_limit(sp)[None, :]
    V = np.where(admissible, V, -np.inf)
    has_candidate = admissible.any(axis=1)
    defined = np.isfinite(V).any(axis=1)
    if np.any(has_candidate & ~defined):
        t = int(np.flatnonzero(has_candidate & ~defined)[0])
        raise DomainError(f"likelihood undefined at every admissible k for delta_tilde={grid[t]:.6g}")
    winners = np.where(defined, np.argmax(V, axis=1) + 1, 0)
    winners.setflags(write=False)
    counts = Counter(int(w) for w in winners if w > 0)
    skipped = tuple(int(t) for t in np.flatnonzero(~defined))
    return VoteTally(dict(sorted(counts.items())), grid, skipped, winners)


def select_k(t: VoteTally) -> int:
    if not t.counts:
        raise EmptyTally("every grid point was skipped")
    best = max(t.counts.values())
    return min(k for k, c in t.counts.items() if c == best)


def pppca_estimate(sp: SigmaProfile, m: Optional[int] = None, T: Optional[int] = None) -> EstimateReport:
    """Grid + vote + mode, packaged with the tally as diagnostics."""
    m = sp.m if m is None else m
    grid = build_grid(sp, T)
    tally = vote(sp, m, grid)
    k = select_k(tally)
    diag = {
        "votes": {str(k_): c for k_, c in tally.counts.items()},
        "grid": {"lo": float(grid[0]), "hi": float(grid[-1]), "T": int(grid.size)},
        "skipped": len(tally.skipped),
    }
    return EstimateReport("pppca", k, diag)


# ---------------------------------------------------------------------------
# exact intervals

def exact_delta_interval(sp: SigmaProfile, m: int, k: int):
    """(a_k, b_k) where k beats both neighbours, or None when that set is empty.

    a_k is the root of l_p(k; d) - l_p(k+1; d) (concave in d), b_k the root of
    l_p(k; d) - l_p(k-1; d) (convex in d). Each is bracketed between 0 and the
    extremum of its difference, located from the analytic gradient.
    """
    k = _check_k(sp, k, 2, sp.n - 2)
    n, s2 = sp.n, sp.sigma2_hat
    if np.any(s2[k - 1:k + 2] <= 0) or np.any(sp.eigenvalues[:k + 1] <= 0):
        raise DomainError(f"likelihood undefined near k={k}")
    lp = profile_loglik_path(sp, m)

    def value(j, d):
        den = (n - j) - n * j * d
        if d == 0:
            return lp[j - 1]
        return lp[j - 1] - 0.5 * m * (den * math.log((n - j) / den) - d * n * j * (math.log(s2[j]) + 1.0))

    def slope(j, d):
        return -0.5 * m * n * j * math.log(((n - j) - n * j * d) / ((n - j) * s2[j]))

    def root(fn, lo, hi):
        return bisect(fn, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500)

    def turning_point(falling, top):
        # `falling` decreases in d; return where it crosses zero on [0, top)
        top = top * (1 - 1e-12)
        if falling(0.0) <= 0:
            return 0.0
        if falling(top) >= 0:
            return top
        return root(falling, 0.0, top)

    f = lambda d: value(k, d) - value(k + 1, d)
    g = lambda d: value(k, d) - value(k - 1, d)
    f_peak = turning_point(lambda d: slope(k, d) - slope(k + 1, d), 1.0 / (k + 1) - 1.0 / n)
    g_trough = turning_point(lambda d: slope(k - 1, d) - slope(k, d), 1.0 / k - 1.0 / n)

    # differences of tied-tail likelihoods are zero up to round-off of |l_p|
    tol = 1e-13 * max(1.0, abs(lp[k - 1]))
    if f(f_peak) <= tol or g(0.0) <= tol or g(g_trough) >= -tol:
        return None
    a = 0.0 if f(0.0) >= -tol else root(f, 0.0, f_peak)
    b = root(g, 0.0, g_trough)
    if not a < b:
        return None
    return a, b
