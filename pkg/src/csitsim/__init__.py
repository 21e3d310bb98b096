"""Monte Carlo link-level simulator for multi-antenna wireless power and
data transmission under limited transmitter channel knowledge.

Subpackages cover Rician fading channel models (`channel`), max-min energy
beamforming and SINR-balancing precoding (`beamforming`), short-packet
reliability (`fbl`), CSIT-free wireless energy transfer schemes (`wet`),
reproducible Monte Carlo plumbing (`montecarlo`) and the three study
drivers with their configs (`scenarios`).  The `csitsim` console script
(`cli`) runs the studies from JSON configs and writes CSV/JSON results.
"""

from . import beamforming, channel, fbl, montecarlo, scenarios, units, wet
from .beamforming import (
    MaxminBatchResult,
    PrecodingMatrix,
    SolverReport,
    TransmitCovariance,
    average_sinr_mc,
    maxmin_energy_covariance,
    select_trained_devices,
    sinr_balancing_precoder,
    solve_maxmin_batch,
    statistical_sinr,
)
from .channel import (
    ChannelRealization,
    RicianChannelModel,
    UlaGeometry,
    exponential_correlation,
    path_loss_log_distance,
    sample_channel,
    sample_channel_block,
    second_moment,
    steering_vector,
)
from .fbl import FblConfig, block_error, min_latency, min_latency_for_sinr_samples
from .montecarlo import McEstimate, log10_outage, mc_mean, outage_probability, stream
from .scenarios import (
    Fig1Config,
    Fig1Result,
    Fig2Config,
    Fig2Result,
    Fig4Config,
    Fig4Result,
    Heatmap,
    coverage_fraction,
    run_fig1,
    run_fig2,
    run_fig4,
)
from .units import db_to_linear, dbm_to_mw, linear_to_db, mw_to_dbm
from .wet import (
    EhCircuitModel,
    PowerBeacon,
    WetScheme,
    harvest,
    optimize_rotation,
    rf_power_aa,
    rf_power_sa,
)

__version__ = "0.1.0"

__all__ = [
    "beamforming", "channel", "fbl", "montecarlo", "scenarios", "units", "wet",
    "MaxminBatchResult", "PrecodingMatrix", "SolverReport", "TransmitCovariance",
    "average_sinr_mc", "maxmin_energy_covariance", "select_trained_devices",
    "sinr_balancing_precoder", "solve_maxmin_batch", "statistical_sinr",
    "ChannelRealization", "RicianChannelModel", "UlaGeometry",
    "exponential_correlation", "path_loss_log_distance", "sample_channel",
    "sample_channel_block", "second_moment", "steering_vector",
    "FblConfig", "block_error", "min_latency", "min_latency_for_sinr_samples",
    "McEstimate", "log10_outage", "mc_mean", "outage_probability", "stream",
    "Fig1Config", "Fig1Result", "Fig2Config", "Fig2Result", "Fig4Config",
    "Fig4Result", "Heatmap", "coverage_fraction", "run_fig1", "run_fig2",
    "run_fig4",
    "db_to_linear", "dbm_to_mw", "linear_to_db", "mw_to_dbm",
    "EhCircuitModel", "PowerBeacon", "WetScheme", "harvest",
    "optimize_rotation", "rf_power_aa", "rf_power_sa",
    "__version__",
]
