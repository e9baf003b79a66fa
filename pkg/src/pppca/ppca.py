"""Profile and penalized profile log-likelihoods of probabilistic PCA.

Everything is a function of the eigen-spectrum alone; loadings are never
formed. ``delta_tilde`` is the penalty weight divided by n, admissible on
[0, 1/k - 1/n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError
from .spectrum import EigenSpectrum

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SigmaProfile:
    """Residual-variance MLE path of a spectrum.

    ``sigma2_hat[k]`` is the mean of the trailing n-k eigenvalues for
    k = 0..n-1 (entry 0 is the overall mean, 1 under trace-n scaling).
    """

    spectrum: EigenSpectrum
    sigma2_hat: np.ndarray

    @classmethod
    def from_spectrum(cls, spectrum: EigenSpectrum) -> "SigmaProfile":
        lam = spectrum.eigenvalues
        n = lam.size
        # fsum keeps tied tails exactly tied, which the bound formulas rely on
        tails = np.array([math.fsum(lam[k:]) / (n - k) for k in range(n)])
        tails.setflags(write=False)
        return cls(spectrum, tails)

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def m(self) -> int:
        return self.spectrum.m

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues


def as_profile(obj) -> SigmaProfile:
    if isinstance(obj, SigmaProfile):
        return obj
    if isinstance(obj, EigenSpectrum):
        return SigmaProfile.from_spectrum(obj)
    raise TypeError(f"expected SigmaProfile or EigenSpectrum, got {type(obj).__name__}")


def _check_k(sp: SigmaProfile, k, lo: int = 1, hi=None) -> int:
    hi = sp.n - 1 if hi is None else hi
    if int(k) != k or not lo <= k <= hi:
        raise RangeError(f"k={k} outside {lo}..{hi}")
    return int(k)


def _penalized_denominator(n: int, k: int, delta_tilde: float) -> float:
    if not delta_tilde >= 0:
        raise RangeError(f"delta_tilde={delta_tilde} must be non-negative")
    den = (n - k) - n * k * delta_tilde
    if den <= 0:
        raise RangeError(f"delta_tilde={delta_tilde} not below 1/k - 1/n for k={k}, n={n}")
    return den


def sigma_hat(sp: SigmaProfile, k: int) -> float:
    k = _check_k(sp, k)
    return float(sp.sigma2_hat[k])


def profile_loglik(sp: SigmaProfile, m: int, k: int) -> float:
    """-(m/2)[n log 2pi + sum_{i<=k} log lam_i + (n-k) log sigma2_hat(k) + n]"""
    k = _check_k(sp, k)
    n = sp.n
    lam = sp.eigenvalues[:k]
    s2 = sp.sigma2_hat[k]
    if lam.min() <= 0 or s2 <= 0:
        raise DomainError(f"profile likelihood undefined at k={k}: zero eigenvalue or residual variance")
    return -0.5 * m * (n * LOG_2PI + math.fsum(np.log(lam)) + (n - k) * math.log(s2) + n)


def profile_loglik_path(sp: SigmaProfile, m: int) -> np.ndarray:
    """l_p(k) for k = 1..n-1 as an array; NaN where undefined."""
    n = sp.n
    k = np.arange(1, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        head = np.cumsum(np.log(sp.eigenvalues[:-1]))
        tail = np.log(sp.sigma2_hat[1:])
        out = -0.5 * m * (n * LOG_2PI + head + (n - k) * tail + n)
    return np.where(np.isfinite(out), out, np.nan)


def sigma_tilde(sp: SigmaProfile, k: int, delta_tilde: float) -> float:
    """Penalized residual variance sigma2_hat(k) (n-k) / (n-k-nk delta_tilde)."""
    k = _check_k(sp, k)
    den = _penalized_denominator(sp.n, k, delta_tilde)
    return float(sp.sigma2_hat[k] * (sp.n - k) / den)


def penalized_profile_loglik(sp: SigmaProfile, m: int, k: int, delta_tilde: float) -> float:
    k = _check_k(sp, k)
    n = sp.n
    den = _penalized_denominator(n, k, delta_tilde)
    base = profile_loglik(sp, m, k)
    if delta_tilde == 0:
        return base
    s2 = sp.sigma2_hat[k]
    penalty = den * math.log((n - k) / den) - delta_tilde * n * k * (math.log(s2) + 1.0)
    return base - 0.5 * m * penalty


def penalized_profile_gradient(sp: SigmaProfile, m: int, k: int, delta_tilde: float) -> float:
    """d l_p(k; delta_tilde) / d delta_tilde on the open admissible range."""
    k = _check_k(sp, k)
    n = sp.n
    if not delta_tilde > 0:
        raise RangeError("the gradient is only offered for delta_tilde > 0")
    den = _penalized_denominator(n, k, delta_tilde)
    s2 = sp.sigma2_hat[k]
    if s2 <= 0:
        raise DomainError(f"sigma2_hat({k}) is zero")
    return -0.5 * m * n * k * math.log(den / ((n - k) * s2))


def gradient_root(sp: SigmaProfile, k: int) -> float:
    """delta_tilde where the gradient vanishes: (1/k - 1/n)(1 - sigma2_hat(k))."""
    k = _check_k(sp, k)
    return (1.0 / k - 1.0 / sp.n) * (1.0 - sp.sigma2_hat[k])


def penalized_surface(sp: SigmaProfile, m: int, grid) -> np.ndarray:
    """l_p(k; delta) for every grid value (rows) and k = 1..n-1 (columns).

    Entries where delta is not admissible for k, or the likelihood is
    undefined, are -inf.
    """
    n = sp.n
    d = np.asarray(grid, dtype=float)[:, None]
    k = np.arange(1, n)[None, :]
    lp = profile_loglik_path(sp, m)[None, :]
    s2 = sp.sigma2_hat[1:][None, :]
    den = (n - k) - n * k * d
    with np.errstate(divide="ignore", invalid="ignore"):
        penalty = den * np.log((n - k) / den) - d * n * k * (np.log(s2) + 1.0)
        out = np.where(d == 0, lp, lp - 0.5 * m * penalty)
    return np.where((den > 0) & np.isfinite(out), out, -np.inf)
