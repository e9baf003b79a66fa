"""Simulation scenarios, seeded data generation and the replicate runner.

Randomness: numpy's PCG64 bit generator with ziggurat normals. Replicate r
of a run with base seed s draws from SeedSequence(s, spawn_key=(r,)), so a
replicate's stream does not depend on which worker runs it or in what order.
"""
from __future__ import annotations

import csv
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from .errors import InfeasibleScenario, ParseError, PPPCAError
from .methods import METHODS, parse_methods, run_method
from .ppca import SigmaProfile
from .spectrum import DataMatrix, EigenSpectrum, sample_spectrum

WORKERS_ENV = "PPPCA_WORKERS"


@dataclass(frozen=True)
class Scenario:
    n: int
    m: int
    k_star: int
    sigma2: float
    d2_min: Optional[float] = None
    explicit_d2: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        n, k = int(self.n), int(self.k_star)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "k_star", k)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if n < 3 or self.m < 2:
            raise InfeasibleScenario(f"need n >= 3 and m >= 2, got n={n}, m={self.m}")
        if not 0 <= k <= n - 1:
            raise InfeasibleScenario(f"k_star={k} outside 0..{n - 1}")
        if not 0 < self.sigma2 <= 1:
            raise InfeasibleScenario(f"sigma2={self.sigma2} outside (0, 1]")
        budget = n * (1 - self.sigma2)
        if self.explicit_d2 is not None:
            d2 = tuple(float(v) for v in self.explicit_d2)
            object.__setattr__(self, "explicit_d2", d2)
            if len(d2) != k:
                raise InfeasibleScenario(f"explicit_d2 has {len(d2)} values for k_star={k}")
            if any(b > a for a, b in zip(d2, d2[1:])) or any(v <= 0 for v in d2):
                raise InfeasibleScenario("explicit_d2 must be positive and non-increasing")
            if abs(sum(d2) - budget) > 1e-8 * n:
                raise InfeasibleScenario(f"explicit_d2 sums to {sum(d2):.10g}, expected n(1 - sigma2) = {budget:.10g}")
        elif k > 0:
            if self.d2_min is None or not self.d2_min > 0:
                raise InfeasibleScenario("d2_min must be positive when explicit_d2 is absent")
            object.__setattr__(self, "d2_min", float(self.d2_min))
            if k * self.d2_min > budget * (1 + 1e-12):
                raise InfeasibleScenario(f"k_star * d2_min = {k * self.d2_min:.6g} exceeds n(1 - sigma2) = {budget:.6g}")

    @property
    def id(self) -> str:
        if self.name:
            return self.name
        if self.explicit_d2 is not None:
            d2 = "explicit"
        else:
            d2 = "none" if self.d2_min is None else f"{self.d2_min:g}"
        return f"n{self.n}_m{self.m}_k{self.k_star}_s{self.sigma2:g}_d{d2}"


@dataclass(frozen=True)
class ReplicateResult:
    scenario_id: str
    replicate: int
    seed: int
    k_hat: dict
    wall_time: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# spectra and data

def decay_d2(k: int, total: float, d2_min: float) -> np.ndarray:
    """d2_i = d2_min * rho^(k-i), i = 1..k, with rho >= 1 chosen so the sum is `total`."""
    if k == 1:
        return np.array([total])
    ratio = total / d2_min
    if ratio <= k:
        return np.full(k, d2_min)
    geometric = lambda rho: np.sum(rho ** np.arange(k)) - ratio
    rho = bisect(geometric, 1.0, ratio ** (1.0 / (k - 1)) + 1.0, xtol=1e-15, rtol=1e-15, maxiter=400)
    return d2_min * rho ** np.arange(k - 1, -1, -1)


def population_d2(s: Scenario) -> np.ndarray:
    if s.explicit_d2 is not None:
        return np.array(s.explicit_d2, dtype=float)
    if s.k_star == 0:
        return np.zeros(0)
    return decay_d2(s.k_star, s.n * (1 - s.sigma2), s.d2_min)


def make_population_spectrum(s: Scenario) -> EigenSpectrum:
    lam = np.full(s.n, s.sigma2)
    lam[: s.k_star] += population_d2(s)
    return EigenSpectrum(lam, s.m)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar orthogonal matrix: QR of a Gaussian matrix with diag(R) made positive."""
    while True:
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        signs = np.sign(np.diag(r))
        if np.all(signs != 0):
            return q * signs


def sample_data(s: Scenario, rng: np.random.Generator) -> DataMatrix:
    """Y = W Z + noise with W = U diag(d); draws U, then Z, then the noise."""
    d = np.sqrt(population_d2(s))
    U = random_orthogonal(s.n, rng)[:, : s.k_star]
    Z = rng.standard_normal((s.k_star, s.m))
    noise = np.sqrt(s.sigma2) * rng.standard_normal((s.n, s.m))
    return DataMatrix((U * d) @ Z + noise)


def sample_spectrum_only(s: Scenario, rng: np.random.Generator) -> EigenSpectrum:
    return sample_spectrum(sample_data(s, rng), standardize=False)


def replicate_rng(base_seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(base_seed, spawn_key=(replicate,))))


# ---------------------------------------------------------------------------
# replicates

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _one_replicate(job) -> ReplicateResult:
    s, methods, r, base_seed, options = job
    sp = SigmaProfile.from_spectrum(sample_spectrum_only(s, replicate_rng(base_seed, r)))
    k_hat, wall = {}, {}
    for name in methods:
        t0 = time.perf_counter()
        try:
            k_hat[name] = run_method(name, sp, s.m, **options).k_hat
        except (PPPCAError, ArithmeticError, RuntimeError):
            k_hat[name] = None
        wall[name] = time.perf_counter() - t0
    return ReplicateResult(s.id, r, base_seed, k_hat, wall)


def run_replicates(s: Scenario, methods, R: int, base_seed: int, workers: Optional[int] = None,
                   **options) -> list:
    """R independent replicates; results come back in replicate order.

    `options` are forwarded to every estimator (T, alpha, ...).
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    methods = parse_methods(methods)
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(s, methods, r, int(base_seed), options) for r in range(R)]
    if workers == 1 or R == 1:
        return [_one_replicate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, R)) as pool:
        return list(pool.map(_one_replicate, jobs))


def summarize(results: Sequence[ReplicateResult], k_star: int) -> dict:
    """Per method: mean and median k_hat, proportion exactly correct, missing count."""
    out = {}
    names = [m for m in METHODS if any(m in r.k_hat for r in results)]
    for name in names:
        ks = [r.k_hat[name] for r in results if r.k_hat.get(name) is not None]
        out[name] = {
            "mean_k": statistics.fmean(ks) if ks else None,
            "median_k": statistics.median(ks) if ks else None,
            "prop_correct": sum(k == k_star for k in ks) / len(results),
            "missing": len(results) - len(ks),
        }
    return out


REPLICATE_COLUMNS = ("scenario", "replicate", "seed", "method", "k_star", "k_hat")


def write_replicates_csv(results: Sequence[ReplicateResult], k_star: int, path, timings: bool = False):
    cols = REPLICATE_COLUMNS + (("wall_time",) if timings else ())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in results:
            for name in METHODS:
                if name not in r.k_hat:
                    continue
                k = r.k_hat[name]
                row = [r.scenario_id, r.replicate, r.seed, name, k_star, "" if k is None else k]
                if timings:
                    row.append(repr(float(r.wall_time[name])))
                w.writerow(row)


# ---------------------------------------------------------------------------
# scenario files

def scenario_from_mapping(cfg: dict) -> Scenario:
    known = {"n", "m", "k_star", "sigma2", "d2_min", "explicit_d2", "name"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ParseError(f"unknown scenario key(s): {', '.join(unknown)}")
    missing = [k for k in ("n", "m", "sigma2") if k not in cfg]
    if missing:
        raise ParseError(f"scenario is missing {', '.join(missing)}")
    try:
        d2 = cfg.get("explicit_d2")
        if isinstance(d2, str):
            d2 = tuple(float(v) for v in d2.replace(",", " ").split())
        k_star = int(cfg["k_star"]) if "k_star" in cfg else (len(d2) if d2 is not None else None)
        if k_star is None:
            raise ParseError("scenario needs k_star or explicit_d2")
        return Scenario(
            n=int(cfg["n"]), m=int(cfg["m"]), k_star=k_star, sigma2=float(cfg["sigma2"]),
            d2_min=float(cfg["d2_min"]) if cfg.get("d2_min") not in (None, "") else None,
            explicit_d2=d2, name=str(cfg.get("name", "")),
        )
    except ValueError as exc:
        raise ParseError(f"bad scenario value: {exc}") from exc


def parse_scenario_text(text: str) -> Scenario:
    cfg = {}
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {i}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        cfg[key] = value
    return scenario_from_mapping(cfg)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc.strerror or exc}") from exc
    return parse_scenario_text(text)


def scenario_text(s: Scenario) -> str:
    lines = [f"name = {s.id}", f"n = {s.n}", f"m = {s.m}", f"k_star = {s.k_star}", f"sigma2 = {s.sigma2!r}"]
    if s.explicit_d2 is not None:
        lines.append("explicit_d2 = " + ", ".join(repr(v) for v in s.explicit_d2))
    elif s.d2_min is not None:
        lines.append(f"d2_min = {s.d2_min!r}")
    return "\n".join(lines) + "\n"


FIG1_A = (20, 15, 9, 7, 6, 5, 4, 2.5, 1, 0.5)
FIG1_B = (15, 12, 11, 8, 7, 6, 5, 3, 2, 1)
FIG2_A = (6, 5, 4, 3, 3, 2.5, 2, 2, 1.5, 1)
FIG2_B = (6, 5, 4, 3.5, 3.5, 3.25, 2, 1.5, 0.75, 0.5)

NAMED_SCENARIOS = {
    "fig1a": Scenario(100, 5000, 10, 0.3, explicit_d2=FIG1_A, name="fig1a"),
    "fig1b": Scenario(100, 5000, 10, 0.3, explicit_d2=FIG1_B, name="fig1b"),
    "fig2a": Scenario(100, 5000, 10, 0.7, explicit_d2=FIG2_A, name="fig2a"),
    "fig2b": Scenario(100, 5000, 10, 0.7, explicit_d2=FIG2_B, name="fig2b"),
}
