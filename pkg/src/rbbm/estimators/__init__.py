"""Parameter learning for the beam mixture and the exponential-short baseline."""
from ..dataset import Dataset, DatasetFormatError, load_dataset, load_pose_dataset
from .evaluate import density_curve, fit_distances, model_histogram
from .ml import (EMTrace, ZeroLikelihoodError, loglik, ml_em_fit, ml_responsibilities,
                 default_ml_init)
from .thrun import default_thrun_init, thrun_ml_fit, thrun_responsibilities
from .vb import (VBInit, VBPosterior, VBPriors, default_priors, most_probable_bin,
                 default_vb_init, vb_em_fit, vb_m_step, vb_point_estimates, vb_predictive,
                 vb_responsibilities)

__all__ = [
    "Dataset", "density_curve", "fit_distances", "model_histogram", "DatasetFormatError", "EMTrace", "VBInit", "VBPosterior", "VBPriors",
    "ZeroLikelihoodError", "default_priors", "load_dataset", "load_pose_dataset",
    "loglik", "ml_em_fit", "ml_responsibilities", "most_probable_bin", "default_ml_init",
    "default_thrun_init", "default_vb_init", "thrun_ml_fit", "thrun_responsibilities",
    "vb_em_fit", "vb_m_step", "vb_point_estimates", "vb_predictive", "vb_responsibilities",
]
