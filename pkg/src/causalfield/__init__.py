"""Causal multiscale image models built from mixtures of conditional Gaussian scale mixtures."""

from .errors import (CausalFieldError, DegeneracyError, FormatError, GeometryError,
                     NumericalError, ParameterError)
from .filterstats import LpFitResult, fit_lp_radial_gamma, lp_statistic_table
from .gsm_init import JointGsmMixture, em_fit, to_mcgsm
from .mcgsm import McgsmParams, conditional_sample, log_density, log_likelihood_and_gradient, random_params
from .multiscale import MultiscaleModel, image_log_likelihood, train_multiscale
from .neighborhoods import NeighborhoodMask, PatchDataset, causal_mask, extract_pairs, superpixel_mask
from .pyramid import Pyramid, SuperpixelImage, build_pyramid, collapse_pyramid, haar_forward, haar_inverse
from .rates import RateReport, combine_rates, conditional_cross_entropy, cross_mir, marginal_entropy
from .sampler import SampleConfig, synthesize
from .synth import DeadLeavesConfig, generate_dead_leaves, phase_scramble
from .trainer import TrainConfig, train

__version__ = "0.1.0"
