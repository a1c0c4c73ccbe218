from __future__ import absolute_import, division, print_function

# Forward model
from pnptomo.core.tomo_model import FanBeamGeometry, ForwardOperator, MatrixOperator, DataSplit, \
    shepp_logan, build_operator, apply, apply_adjoint, estimate_lipschitz, add_noise, \
    split_validation

# Denoisers
from pnptomo.core.denoise import Denoiser, Identity, GaussianBlur, Median, SoftThreshold, \
    QuadraticShrink, PatchCollaborative, CnnResidual, Attenuated, Combined, DENOISERS, denoise, \
    attenuated, combined, quadratic_shrink, soft_threshold, patch_collaborative, \
    classical_denoiser, learned_denoiser
from pnptomo.core.patch_filter import PatchParams
from pnptomo.core.cnn import CnnWeights, load_cnn_weights, save_cnn_weights, synthetic_weights

# Solvers
from pnptomo.core.solvers import cgls, gd_inner, cgls_run, fbs_pnp, admm_pnp, CglsInner, GdInner, \
    WarmStart, OAConfig, FbsConfig, SelectionHooks, CglsSolver, FbsPnPSolver, AdmmPnPSolver, \
    NonFiniteIterateError
from pnptomo.core.run_record import RunRecord, RunRow

# Diagnostics and selection
from pnptomo.core.diagnostics import DescentConfig, DescentRegime, dc_ratio, descent_inner, \
    sufficient_check, generalized_descent_ok, mse_rel, psnr, ssim, residual_err
from pnptomo.core.selection import cv_error, should_stop, select_alpha

# Experiments
from pnptomo.config.config import ExperimentConfig, InvalidConfigFileError, validate_config
from pnptomo.core.experiment import ExperimentRunner, denoise_bench
