"""Period estimation for irregularly sampled series with periodic-kernel Gaussian processes."""

from .baselines import Periodogram, baseline_estimate, lomb_scargle, pdm
from .fastpath import (LowRankConfig, SubsampleConfig, epsnet_fine_scan, lowrank_chol_shift,
                       subsample_ensemble_score, taylor_kernel_step)
from .gp import GpFit, lml_gradient, log_marginal_likelihood, loo_cv_error, predict
from .grid import FrequencyGrid, ScoreTable, build_coarse_grid, build_fine_grid
from .kernel import Hyperparams, cov, cov_grad, cov_matrix
from .lightcurve import (CandidateList, Criterion, LightCurve, LightCurveError, PeriodEstimate, PhasedCurve,
                         accuracy_hit, dump_lightcurve, fold, load_lightcurve)
from .linalg import (CholeskyFactor, EigenPairs, NotPositiveDefiniteError, cholesky, logdet, rank_one_update,
                     solve_lower, solve_system, sym_eigen)
from .priors import (PeriodScorer, ReferenceScorer, combine_methods, double_period_filter, filter_select,
                     map_score)
from .search import (DegenerateSeriesError, SearchConfig, SearchResult, estimate_period, grid_scan,
                     optimize_nuisance, run_search)
from .synth import BenchReport, SynthSpec, gen_gp, gen_harmonic, run_benchmark

__version__ = "0.1.0"
