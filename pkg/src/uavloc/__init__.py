"""Deterministic multi-UAV localization simulator.

Two desk-scale missions: tracking a moving target with a four-UAV swarm
under U2U or edge-assisted communication, and indoor mapping plus target
detection with occupancy grids and edge-fused Q-learning.
"""

from .comms import (CommsConfig, ConnectivityGraph, EdgeQueue, MapSummary, Packet,
                    build_connectivity, disseminate_u2u)
from .control import (Experience, NavConstraints, QParams, QTable, RewardConfig,
                      epsilon_at, fallback_orbit, fuse_experiences, nav_cost,
                      nav_gradient, navigate, project_step, q_select_action,
                      q_update)
from .core import (MobilityLimits, RngStream, SimClock, TargetState, UavPose, Vec2,
                   rng_stream, step_target, step_uav, vec2)
from .inference import (DetectionResult, GaussianBelief, InverseScanModel,
                        LogOddsGrid, MotionModel, OpCounters, ekf_predict,
                        ekf_update, ekf_update_linear, fit_exponent, glrt_detect,
                        glrt_threshold, initial_belief, og_update)
from .scenarios import (ExplorationConfig, ExplorationResult, TrackingConfig,
                        TrackingResult, default_indoor_map, empirical_cdf,
                        map_accuracy, positive_q_sum, run_exploration, run_tracking)
from .sensing import (EnergyMatrix, RangeMeasurement, ThzRadarParams, TrueMap,
                      beacon_amplitude, beacon_observation, measure_range, scan_thz)

__version__ = "0.1.0"
