"""Batch Bayesian optimization: closed-form multipoint expected improvement,
its analytic gradient, BUCB baselines, and a regret benchmark harness."""

__version__ = "0.1.0"

from .batchopt import AscentConfig, AscentResult, bounded_quasi_newton, maximize_qei
from .bucb import BetaSchedule, beta, bucb_batch
from .gp import (DomainBox, Kernel, PosteriorGP, believer_augment,
                 posterior_cov, posterior_cov_grad, posterior_mean,
                 posterior_mean_grad, sample_path)
from .mvn import (CdfAccuracy, CdfCallCounter, SpdMatrix, conditional_reduce,
                  mvn_cdf, mvn_cdf_dcov, mvn_cdf_dpoint, mvn_pdf)
from .qei import (Batch, MomentPair, QeiGradient, mc_qei, moments, qei_grad,
                  qei_grad_fd, qei_value)

__all__ = [
    "AscentConfig", "AscentResult", "Batch", "BetaSchedule", "CdfAccuracy",
    "CdfCallCounter", "DomainBox", "Kernel", "MomentPair", "PosteriorGP",
    "QeiGradient", "SpdMatrix", "believer_augment", "beta",
    "bounded_quasi_newton", "bucb_batch", "conditional_reduce", "maximize_qei",
    "mc_qei", "moments", "mvn_cdf", "mvn_cdf_dcov", "mvn_cdf_dpoint",
    "mvn_pdf", "posterior_cov", "posterior_cov_grad", "posterior_mean",
    "posterior_mean_grad", "qei_grad", "qei_grad_fd", "qei_value",
    "sample_path",
]
