"""Zero-shot video restoration at desk scale.

Degradation operators with exact adjoints, proximal solvers (CG, PDHG, Adam),
weighted 3-D total variation, the split-Langevin sampler family, two
baselines, reference metrics, and a wire protocol for attaching external
consistency-model priors.  See README.md for the CLI and the config format.
"""

from .video import VideoTensor, SliceImage, load_video, save_video, slice_extract
from .operators import (BoundOp, Compose, Identity, NoiseSpec, SpatialPool,
                        TemporalCircBlur, TemporalPool, degrade, op_from_spec,
                        problem_operator, pseudo_inverse_init)
from .regularizers import TVWeights, grad3, div3, tv3
from .prox import (AdamParams, CGParams, PDHGParams, cg_solve, prox_quadratic,
                   prox_tv_data_adam, prox_tv_data_pdhg)
from .priors import (AlphaSchedule, GaussianPriorSpec, Prior, external_prior_connect,
                     gaussian_consistency, gaussian_eps_predict, gaussian_prior,
                     identity_prior, sae_step, smoothing_consistency, smoothing_prior)
from .samplers import (RunReport, SamplerConfig, VisionXLConfig, admm_tv_restore,
                       latino_image_restore, latino_restore, latino_v_restore,
                       vision_xl_restore)
from .metrics import MetricReport, evaluate, psnr, ssim
from .wire import PriorClient, ProtocolError

__version__ = "0.1.0"
