"""Special functions, trend / white-noise / causality tests and OLS outlier detection."""
from ._result import TestResult
from .autocorr import acf, acf_cutoff, ljung_box
from .granger import granger_test
from .mann_kendall import mann_kendall
from .ols import (OlsFit, OutlierReport, RankDeficientError, bonferroni_threshold, ols,
                  polyfit_ols, studentized_outliers, studentized_residuals)
from .special import chi2_cdf, chi2_sf, f_cdf, f_sf, norm_cdf, t_cdf, t_ppf, t_sf

__all__ = [
    "TestResult", "acf", "acf_cutoff", "ljung_box", "granger_test", "mann_kendall",
    "OlsFit", "OutlierReport", "RankDeficientError", "bonferroni_threshold", "ols",
    "polyfit_ols", "studentized_outliers", "studentized_residuals",
    "chi2_cdf", "chi2_sf", "f_cdf", "f_sf", "norm_cdf", "t_cdf", "t_ppf", "t_sf",
]
