"""Effective dimension of a data matrix by penalized probabilistic PCA with grid voting."""

__version__ = "0.1.0"

from .errors import (DegenerateBound, DegenerateFeature, DegenerateSpectrum, DomainError, EmptyTally,
                     InfeasibleScenario, NumericalError, ParseError, PPPCAError, RangeError, ShapeError)
from .spectrum import DataMatrix, EigenSpectrum, load_matrix, sample_spectrum, standardize_features
from .ppca import (SigmaProfile, penalized_profile_gradient, penalized_profile_loglik, profile_loglik,
                   sigma_hat, sigma_tilde)
from .baselines import (EstimateReport, cumlog_select, ic_select, lawley_select, lawley_statistic,
                        vard_select)
from .select import (DeltaBounds, VoteTally, admissible_k_max, bound_u_a, bound_u_b, build_grid,
                     exact_delta_interval, pppca_estimate, select_k, vote)
from .simgen import (Scenario, make_population_spectrum, random_orthogonal, run_replicates, sample_data,
                     sample_spectrum_only)
