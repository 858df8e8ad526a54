"""Simulation toolkit for the disordered pinning model with correlated Gaussian disorder."""

from .renewal import Constant, InterArrivalLaw, LogPower, build_law, mass, pure_free_energy, xi_bound
from .disorder import (IID, CovarianceSpec, DisorderSample, ExpDecay, FiniteRange, PowerLaw,
                       empirical_covariance, gamma, gamma_bar_n, sample, spectral_bounds, truncate)
from .polymer import (PathSample, PolymerWorkspace, brute_force, build_workspace, contact_cumulants,
                      contact_marginal, contact_moments, endpoint_mass, log_partition, log_partition_minus,
                      pair_covariance, sample_path, sample_paths)
from .estimators import (EstimateRecord, centering_statistics, critical_point_scan, free_energy,
                         free_energy_derivatives, mu_hat)

__version__ = "0.1.0"
