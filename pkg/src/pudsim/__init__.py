"""Command-level simulator of processing-using-DRAM in commodity DDR4 chips."""
from .analog import charge_share, monte_carlo_success, sense
from .bank import Bank, BankState, Subarray, apa, classify_timing, init_subarray
from .casestudies import (CostModel, PudProgram, destruction_time, estimate_speedup,
                          lower_kernel)
from .decoder import activation_set, find_pair_for_count, split_address
from .harness import ExperimentConfig, discover_subarrays, export, run_experiment
from .ops import maj_x, multi_row_copy, plan_replication, row_clone, success_rate
from .profile import PRESETS, AnalogParams, DeviceProfile, get_profile, load_profile

__version__ = "0.1.0"

__all__ = [
    "AnalogParams", "Bank", "BankState", "CostModel", "DeviceProfile", "ExperimentConfig",
    "PRESETS", "PudProgram", "Subarray", "activation_set", "apa", "charge_share",
    "classify_timing", "destruction_time", "discover_subarrays", "estimate_speedup", "export",
    "find_pair_for_count", "get_profile", "init_subarray", "load_profile", "lower_kernel",
    "maj_x", "monte_carlo_success", "multi_row_copy", "plan_replication", "row_clone",
    "run_experiment", "sense", "split_address", "success_rate",
]
