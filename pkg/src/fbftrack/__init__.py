"""Feedforward tracking control with filtered basis functions, an
online-learned correction model, delayed measurement handling, and
closed-loop spectral-radius monitoring."""

from .basis import BasisConfig, BasisSet, build_bspline_basis, filter_and_partition, steady_window_blocks
from .config import ConfigError, ExperimentConfig, build_experiment_config, load_config
from .controller import ControllerSettings, TrackingRecord, optimize_window, reconstruct_input, run_tracking
from .harness import SummaryMetrics, run_experiment, summarize, sweep
from .hybrid import DataDrivenLift, HybridConfig, HybridModel, build_lift_batch, build_lift_window
from .lifted import (ContinuousTransferFunction, DiscreteStateSpace,
                     LiftedOperator, discretize_zoh, effective_impulse_length,
                     impulse_response, lifted_filter, simulate)
from .plant import Batch, Plant, PlantConfig
from .stability import (ClosedLoopSystem, assemble_closed_loop,
                        check_stability, pseudo_inverse, spectral_radius)
from .trajectory import generate_trajectory

__version__ = "0.1.0"
