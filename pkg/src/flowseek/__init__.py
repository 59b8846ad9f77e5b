"""flowseek: numerical building blocks for rigid-scene optical flow.

The package provides rigid-motion flow bases and their least-squares
subspace fitting, 4D all-pair correlation pyramids with bilinear lookup,
a mixture-of-Laplace supervision objective with verified gradients, convex
upsampling and flow metrics, the standard flow file formats, a deterministic
synthetic scene generator, and an end-to-end classical basis-coefficient
flow estimator.  Everything is CPU-only, deterministic, and desk-scale.
"""

from .bases import (
    EIGHT_BASIS_NAMES,
    FOCAL_FREE,
    SIX_BASIS_NAMES,
    MotionBasisSet,
    build_eight_bases,
    build_six_bases,
    normalize_bases,
)
from .correlation import (
    DEFAULT_STRIDES,
    CorrelationPyramid,
    FeatureMap,
    LookupPatch,
    avg_pool,
    build_pyramid,
    correlate_all_pairs,
    kernel_backend,
    lookup,
)
from .errors import (
    DimensionError,
    EmptyProblemError,
    EstimationError,
    FlowFormatError,
    FlowRangeError,
    FlowSeekError,
    ParameterError,
)
from .estimator import EstimateResult, EstimatorConfig, estimate_rigid_flow, make_feature_map
from .flow_io import (
    FlowFileFormat,
    flow_to_color,
    read_flo,
    read_flow,
    read_kitti_png,
    write_flo,
    write_flow,
    write_kitti_png,
)
from .flowops import (
    ConvexWeights,
    FlowMetrics,
    bilinear_warp,
    compute_metrics,
    convex_upsample,
)
from .geometry import (
    CameraIntrinsics,
    FlowField,
    InverseDepthMap,
    NormalizedGrid,
    RigidMotion,
    VelocityMotion,
    instantaneous_flow,
    make_normalized_grid,
    reprojection_flow,
)
from .subspace import BasisCoefficients, fit_coefficients, reconstruct, subspace_residual
from .supervision import (
    LaplaceMixtureParams,
    LossConfig,
    finite_difference_check,
    mixture_nll,
    mixture_nll_grad,
    sequence_loss,
)
from .synth import SceneSpec, emit_dataset, generate_scene, standard_suite

__version__ = "0.1.0"
