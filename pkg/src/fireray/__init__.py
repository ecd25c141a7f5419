"""Curved-ray 3D-to-2D point cloud projection with utilization-driven ray search."""

__version__ = "0.1.0"

from .cloud import (
    BallSummary, PointCloud, ViewPlane, ball_aggregate, default_planes, farthest_point_sample,
    load_cloud, normalize_cloud, partition_view,
)
from .fireworks import MutationConfig, RandomStream, SearchTrace, gaussian_sample, mutate, optimize_plane
from .objective import (
    UtilizationReport, cross_entropy, gauss_reg, grad_gauss_reg, l_sparks, total_loss, u_space,
)
from .predictor import PredictorWeights, attention_embed, predict_kappa
from .projection import PixelCoord, RayParams, boundary_check, classify_ray, project_point
from .raster import RasterImage, black_mask, encode_ppm, render_view
from .scenes import SceneSpec, SweepRow, sweep_grid, synth_room
