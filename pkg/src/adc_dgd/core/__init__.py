"""
Core module for consensus simulation
"""

from .graph import (
    Graph, ConsensusMatrix, build_ring, build_star, build_path, from_edges,
    metropolis_matrix, explicit_matrix, spectral_beta,
)
from .objectives import (
    Objective, QuadraticObjective, FunctionObjective, ObjectiveSet, quadratic, sum_gradient,
    global_minimizer_quadratic, lipschitz_bound, growth_ratio_check,
)
from .compression import (
    Compressor, CompressorKind, Codeword, compress_round, compress_grid, compress_sparsify,
    decode, variance_bound, empirical_unbiasedness,
)
from .algorithms import (
    Algorithm, StepSchedule, NodeState, NetworkState, RoundOutput, step_size,
    dgd_round, naive_compressed_round, adc_round, dgd_t_round,
)
from .metrics import (
    RoundMetrics, mean_iterate, consensus_error, lyapunov, lyapunov_lipschitz_check,
    h_sequence, step_size_admissibility,
)
from .engine import RunConfig, Trace, TrialTrace, Termination, run, run_trials, derive_stream
from .config_loader import ConfigLoader, parse_config
from .presets import Preset, preset, get_preset
from .csv_export import emit_csv, emit_aggregate_csv
from .verifiers import CheckReport, check

__all__ = [
    # Graphs
    'Graph', 'ConsensusMatrix', 'build_ring', 'build_star', 'build_path', 'from_edges',
    'metropolis_matrix', 'explicit_matrix', 'spectral_beta',

    # Objectives
    'Objective', 'QuadraticObjective', 'FunctionObjective', 'ObjectiveSet', 'quadratic', 'sum_gradient',
    'global_minimizer_quadratic', 'lipschitz_bound', 'growth_ratio_check',

    # Compression
    'Compressor', 'CompressorKind', 'Codeword', 'compress_round', 'compress_grid', 'compress_sparsify',
    'decode', 'variance_bound', 'empirical_unbiasedness',

    # Round kernels
    'Algorithm', 'StepSchedule', 'NodeState', 'NetworkState', 'RoundOutput', 'step_size',
    'dgd_round', 'naive_compressed_round', 'adc_round', 'dgd_t_round',

    # Metrics
    'RoundMetrics', 'mean_iterate', 'consensus_error', 'lyapunov', 'lyapunov_lipschitz_check',
    'h_sequence', 'step_size_admissibility',

    # Simulation
    'RunConfig', 'Trace', 'TrialTrace', 'Termination', 'run', 'run_trials', 'derive_stream',
    'ConfigLoader', 'parse_config', 'Preset', 'preset', 'get_preset',
    'emit_csv', 'emit_aggregate_csv', 'CheckReport', 'check',
]
