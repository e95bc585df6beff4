"""vrsnet: predicts visual-error metrics of reduced-rate shading from
G-buffer and reprojection data, and drives per-tile shading-rate selection."""

from .evaluation import EvalReport, evaluate, mae_stats, r2_score
from .inference import predict_batch, predict_tiles
from .metrics import (JndConfig, MetricId, jnd_threshold, luminance, mald_metric,
                      rmse_metric, sflip_metric, tile_aggregate, weber_correct)
from .modelio import load_model, load_model_file, save_model, save_model_file
from .network import NetworkConfig, NetworkModel, build_network, forward, backward, pooling_schedule
from .rates import COST_ORDER, PREDICTED_RATES, REDUCED_RATES, ShadingRate
from .tensorio import load_tensor, save_tensor
from .training import adaptive_loss, train
from .transforms import (TransformSpec, t_clamped, t_clamped_inv, t_logistic,
                         t_logistic_inv, update_mu)
from .vrs import (ExtrapolationConfig, RateDecisionMap, TilePrediction,
                  choose_mode, extrapolate_rates, threshold_for)

__version__ = "0.1.0"
