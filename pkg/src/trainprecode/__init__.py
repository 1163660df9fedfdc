"""
Joint pilot and linear precoder design for MIMO links with statistical
channel knowledge, through the effective SNR matrix.
"""

from .channel_model import (AllocationPair, ChannelCovariance, ConfigError,
                            SystemConfig, effective_snr,
                            estimation_covariances, snr_profile_vec)
from .joint_optimizer import (JointResult, run_boost, run_fixed_budgets,
                              run_full_fledged, run_none, run_precoder_only)
from .pareto_frontier import (maximize_nu_boost, maximize_nu_fixed_budgets,
                              sample_border)
from .pilot_stage import optimize_pilot
from .precoder_stage import optimize_precoder, simplex_region
from .utilities import UtilitySpec, UtilityValue, evaluate, gradient

__version__ = '0.1.0'
