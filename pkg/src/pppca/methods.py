"""Name-based dispatch over every estimator, shared by the simulator and the CLI."""
from __future__ import annotations

from .baselines import EstimateReport, cumlog_select, ic_select, lawley_select, vard_select
from .ppca import SigmaProfile
from .select import pppca_estimate

METHODS = ("pppca", "aic", "bic", "cumlog", "vard", "lawley")


def parse_methods(requested) -> tuple:
    """'all' or a comma list -> names in canonical order."""
    if isinstance(requested, str):
        names = [s.strip().lower() for s in requested.split(",") if s.strip()]
    else:
        names = [str(s).lower() for s in requested]
    if "all" in names:
        return METHODS
    unknown = sorted(set(names) - set(METHODS))
    if unknown:
        raise ValueError(f"unknown method(s) {', '.join(unknown)}; choose from {', '.join(METHODS)} or all")
    if not names:
        raise ValueError("no methods requested")
    return tuple(m for m in METHODS if m in names)


def run_method(name: str, sp: SigmaProfile, m: int, T=None, alpha: float = 0.05,
               cumlog_variant: str = "head", cumlog_k_min: int = 1,
               lawley_classical: bool = False) -> EstimateReport:
    if name == "pppca":
        return pppca_estimate(sp, m, T)
    if name in ("aic", "bic"):
        return ic_select(sp, m, name)
    if name == "cumlog":
        return cumlog_select(sp, cumlog_k_min, cumlog_variant)
    if name == "vard":
        return vard_select(sp)
    if name == "lawley":
        return lawley_select(sp, m, alpha, classical=lawley_classical)
    raise ValueError(f"unknown method {name!r}")
