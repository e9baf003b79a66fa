"""Comparison estimators on the same spectrum: AIC/BIC, Cumlog, VarD and Lawley's test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import DomainError, RangeError
from .ppca import SigmaProfile, profile_loglik_path


@dataclass(frozen=True)
class EstimateReport:
    method: str
    k_hat: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"method": self.method, "k_hat": self.k_hat, "diagnostics": self.diagnostics}


def _as_list(a) -> list:
    return [float(x) if np.isfinite(x) else None for x in np.asarray(a, dtype=float)]


def _first_argmin(values: np.ndarray) -> int:
    if np.all(np.isnan(values)):
        raise DomainError("criterion undefined at every candidate k")
    return int(np.nanargmin(values))


def free_parameters(n: int, k) -> np.ndarray:
    """p(k) = nk + 1 - k(k-1)/2"""
    k = np.asarray(k)
    return n * k + 1 - k * (k - 1) // 2


def ic_select(sp: SigmaProfile, m: int, kind: str = "bic") -> EstimateReport:
    """argmin over k = 1..n-1 of -2 l_p(k) + w p(k), w = 2 (aic) or log m (bic).

    k where l_p is undefined (zero eigenvalues) stay in the path as None and
    are never selected.
    """
    if kind not in ("aic", "bic"):
        raise ValueError(f"kind must be 'aic' or 'bic', not {kind!r}")
    n = sp.n
    k = np.arange(1, n)
    weight = 2.0 if kind == "aic" else math.log(m)
    crit = -2.0 * profile_loglik_path(sp, m) + weight * free_parameters(n, k)
    best = _first_argmin(crit)
    return EstimateReport(kind, int(k[best]), {"k": k.tolist(), "criterion": _as_list(crit)})


def _jensen_gap(x: np.ndarray) -> float:
    """log(mean x) - mean(log x), zero exactly for constant x."""
    if np.ptp(x) == 0:
        return 0.0
    mu = math.fsum(x) / x.size
    return -math.fsum(np.log(x / mu)) / x.size


def cumlog_select(sp: SigmaProfile, k_min: int = 1, variant: str = "head") -> EstimateReport:
    """argmin_k of the Jensen gap log(mean) - mean(log) of the leading k eigenvalues.

    As written the head criterion is 0 at k=1 and positive after, so k_min
    matters. The "tail" variant applies the gap to lam_{k+1..n} instead and
    scans k = k_min..n-2.
    """
    lam = sp.eigenvalues
    n = sp.n
    if variant == "head":
        ks = np.arange(k_min, n)
        scanned = lam[: n - 1]
        pick = lambda k: lam[:k]
    elif variant == "tail":
        ks = np.arange(k_min, n - 1)
        scanned = lam[k_min:]
        pick = lambda k: lam[k:]
    else:
        raise ValueError(f"variant must be 'head' or 'tail', not {variant!r}")
    if ks.size == 0 or k_min < 1:
        raise RangeError(f"k_min={k_min} leaves nothing to scan")
    if scanned.min() <= 0:
        raise DomainError("zero eigenvalue inside the scanned range")
    crit = np.array([_jensen_gap(pick(k)) for k in ks])
    best = int(np.argmin(crit))
    return EstimateReport("cumlog", int(ks[best]),
                          {"variant": variant, "k": ks.tolist(), "criterion": _as_list(crit)})


def vard_select(sp: SigmaProfile) -> EstimateReport:
    """argmax over k = 1..n-1 of the population variance of the leading k eigenvalues."""
    lam = sp.eigenvalues
    k = np.arange(1, sp.n)
    # centered form: identical to mean(x^2) - mean(x)^2 but never negative
    crit = np.array([np.mean((lam[:j] - lam[:j].mean()) ** 2) for j in k])
    best = int(np.argmax(crit))
    return EstimateReport("vard", int(k[best]), {"k": k.tolist(), "criterion": _as_list(crit)})


def lawley_statistic(sp: SigmaProfile, m: int, j: int, classical: bool = False,
                     literal_inner: bool = False):
    """Chi-square statistic for equality of the trailing eigenvalues lam_j..lam_n.

    With p = n - j + 1 tail values and tail mean mu:
        bracket = p log(mu) - sum log(tail)
        c = p - (2p + 1 + 2/p)/6 + mu^2 sum_{i<j} (lam_i - mu)^-2
        statistic = c * bracket   (classical=True: m * bracket)
    `literal_inner` uses lam_j in place of lam_i inside the correction sum.
    Returns (statistic, dof) with dof = p(p+1)/2 - 1.
    """
    n = sp.n
    if int(j) != j or not 1 <= j <= n - 2:
        raise RangeError(f"j={j} outside 1..{n - 2}")
    j = int(j)
    lam = sp.eigenvalues
    tail = lam[j - 1:]
    p = tail.size
    if tail.min() <= 0:
        raise DomainError(f"zero eigenvalue in the tail starting at j={j}")
    dof = p * (p + 1) // 2 - 1
    gap = _jensen_gap(tail) * p
    if classical:
        return m * gap, dof
    mu = math.fsum(tail) / p
    head = np.full(j - 1, lam[j - 1]) if literal_inner else lam[: j - 1]
    with np.errstate(divide="ignore"):
        correction = mu * mu * np.sum((head - mu) ** -2.0)
    c = p - (2 * p + 1 + 2.0 / p) / 6.0 + correction
    return (c * gap if gap != 0 else 0.0), dof


def lawley_select(sp: SigmaProfile, m: int, alpha: float = 0.05, classical: bool = False,
                  literal_inner: bool = False) -> EstimateReport:
    """Sequential equality tests on the last n-q eigenvalues, q = 0, 1, ...

    Returns the first q that is not rejected at level alpha, or n-2 when
    every test rejects.
    """
    if not 0 < alpha < 1:
        raise RangeError(f"alpha={alpha} must lie strictly between 0 and 1")
    n = sp.n
    stats, pvals = [], []
    k_hat = n - 2
    for q in range(0, n - 2):
        stat, dof = lawley_statistic(sp, m, q + 1, classical, literal_inner)
        pv = float(chi2.sf(stat, dof))
        stats.append(stat)
        pvals.append(pv)
        if pv >= alpha:
            k_hat = q
            break
    return EstimateReport("lawley", k_hat, {"q": list(range(len(stats))), "statistic": _as_list(stats),
                                            "p_value": pvals, "alpha": alpha})
