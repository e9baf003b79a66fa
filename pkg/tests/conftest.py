import numpy as np
import pytest

from pppca.ppca import SigmaProfile
from pppca.simgen import NAMED_SCENARIOS, make_population_spectrum, replicate_rng, sample_spectrum_only
from pppca.spectrum import EigenSpectrum

_ACCEPTANCE_LINES = []


def record_acceptance(label: str, passed: bool, detail: str = ""):
    _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {label}" + (f"  ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def profile_of(values, m=100) -> SigmaProfile:
    return SigmaProfile.from_spectrum(EigenSpectrum.from_values(values, m))


def ones_profile(n=10, m=100) -> SigmaProfile:
    return SigmaProfile.from_spectrum(EigenSpectrum(np.ones(n), m))


@pytest.fixture(scope="session")
def population():
    """Population profiles of the four named scenarios."""
    return {k: SigmaProfile.from_spectrum(make_population_spectrum(s)) for k, s in NAMED_SCENARIOS.items()}


@pytest.fixture(scope="session")
def sampled():
    """Seeded sample-spectrum profiles (seeds 0..2) of the named scenarios."""
    return {k: [SigmaProfile.from_spectrum(sample_spectrum_only(s, replicate_rng(seed, 0))) for seed in range(3)]
            for k, s in NAMED_SCENARIOS.items()}
