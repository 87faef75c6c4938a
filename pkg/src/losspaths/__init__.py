"""Loss-landscape exploration toolkit.

Small dense networks trained with two contrasting optimizers (mini-batch SGD
and L-BFGS with a golden-section line search), Fourier-parametrized low-loss
paths between optimized parameter vectors, and solution-set geometry via
kernel PCA and L2 shell statistics.
"""

__version__ = "0.1.0"

from .nets import (NetworkSpec, Batch, fcp_spec, autoencoder_spec, loss,
                   loss_and_grad, flatten, unflatten, init_params)
from .mnist import (Dataset, BatchPlan, parse_idx_images, parse_idx_labels,
                    standard_split, minibatches, full_batch)
from .optim import (TrainingTrace, GssConfig, GssResult, LbfgsHistory,
                    AdamState, sgd_run, lbfgs_direction, golden_section_search,
                    lbfgs_gss_minimize, lbfgs_gss_run, adam_step)
from .landscape import (ScalarLandscape, GaussianMixture2D, NNLandscape,
                        synthetic_value, synthetic_grad, nn_landscape, W1, W2)
from .paths import (FourierPath, PathLossConfig, PathReport, path_loss,
                    path_loss_grad, optimize_path, barrier_survey,
                    synthetic_path_config, nn_path_config)
from .geometry import (KernelKind, KpcaModel, ShellStats, linear_kernel,
                       polynomial_kernel, rbf_kernel, kernel_matrix,
                       center_kernel, kpca_fit, kpca_project, shell_stats,
                       component_stats)
from .harness import (ExperimentConfig, SolutionSet, run_seed, spec_hash,
                      write_solution, read_solution, load_solution_set,
                      cmd_train, cmd_pathsurvey, cmd_analyze, cmd_synth)
