"""Finite tight-binding spin systems, interface junctions, and numerical
verification of the bulk-interface correspondence for spin conductances."""

__version__ = "0.1.0"

from .calculus import (AlmostAnalyticExtension, DensityFunction, SpectralData,
                       apply_density, apply_density_quadrature,
                       correlation_diagonal, correlation_matrix,
                       density_for_gap, off_diagonal_part,
                       projected_block_part)
from .conductance import (BicReport, DriftOutcome, ExpDecayFit, SigmaOutcome,
                          SpectralCache, bulk_spin_conductance,
                          bulk_torque_trail, charge_switch_index,
                          default_density, default_switch, drift_conductance,
                          exp_decay_fit, kubo_spin_conductance,
                          strip_distances, torque_conductance, verify_bic)
from .geometry import (LatticeSample, LatticeSpec, Region, SwitchProfile,
                       build_bulk_sample, build_junction_sample, core_window,
                       half_plane_region, strip_region)
from .models import (BulkModel, atomic_insulator, bhz, bloch_gap, build_model,
                     chern_number, common_gap, kane_mele, realize_bulk,
                     realize_junction, spin_chern_numbers, spinful_haldane,
                     time_reversal_defect)
from .operators import (DecayFit, LatticeOperator, PvTraceTrail,
                        anticommutator, commutator, diag_multiplier,
                        pv_trace_x1, region_trace, spin_operator,
                        verify_tight_binding)
from .config import (ConfigError, MODEL_PRESETS, RunConfig, canonical_json,
                     config_from_dict, config_hash, load_config,
                     merged_config)
from .reporting import (ReportError, RunRecord, Series, emit_plot_data,
                        load_record, make_check, render_figures, save_record)
from .cli import execute, run, write_outputs

__all__ = [
    "AlmostAnalyticExtension", "BicReport", "BulkModel", "ConfigError",
    "DecayFit", "DensityFunction", "DriftOutcome", "ExpDecayFit",
    "LatticeOperator", "LatticeSample", "LatticeSpec", "MODEL_PRESETS",
    "PvTraceTrail", "Region", "ReportError", "RunConfig", "RunRecord",
    "Series", "SigmaOutcome", "SpectralCache", "SpectralData",
    "SwitchProfile", "anticommutator", "apply_density",
    "apply_density_quadrature", "atomic_insulator", "bhz", "bloch_gap",
    "build_bulk_sample", "build_junction_sample", "build_model",
    "bulk_spin_conductance", "bulk_torque_trail", "canonical_json",
    "charge_switch_index", "chern_number", "commutator", "common_gap",
    "config_from_dict", "config_hash", "core_window", "correlation_diagonal",
    "correlation_matrix", "default_density", "default_switch",
    "density_for_gap", "diag_multiplier", "drift_conductance", "emit_plot_data",
    "execute", "exp_decay_fit", "half_plane_region", "kane_mele",
    "kubo_spin_conductance", "load_config", "load_record", "make_check",
    "merged_config", "off_diagonal_part", "projected_block_part",
    "pv_trace_x1", "realize_bulk", "realize_junction", "region_trace",
    "render_figures", "run", "save_record", "spin_chern_numbers",
    "spin_operator", "spinful_haldane", "strip_distances", "strip_region",
    "time_reversal_defect", "torque_conductance", "verify_bic",
    "verify_tight_binding", "write_outputs",
]
