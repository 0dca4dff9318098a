"""
Interpretability instruments for DRC weights and the plan engine: encoder
folding, direct effect, ablations, causal interventions, weight steering,
regressions and probes.
"""

from .ablation import (
    ABLATION_TENSORS,
    AblationResult,
    apply_ablation,
    collect_means,
    compare_cache_groups,
    gate_importance,
    mean_replacements,
    wta_slices,
    zero_kernel_slices,
)
from .effects import DirectEffect, direct_effect, reconstruct_pre
from .encoder import CombinedEncoder, combine_encoder, interior_error, two_stage_gate_input
from .features import (
    BASE_FEATURES,
    FUTURE_FEATURES,
    FeatureSet,
    RecordedStep,
    build_features,
    steps_from_drc,
    steps_from_episode,
)
from .intervene import (
    PROTOCOL_GROUPS,
    DrcContext,
    EngineContext,
    InterventionOutcome,
    InterventionScore,
    Transition,
    causal_intervene,
    collect_drc_transitions,
    collect_engine_transitions,
    group_protocol,
    intervention_score,
)
from .probes import (
    AucReport,
    AucRow,
    ProbeFit,
    auc_probe,
    classify_horizon,
    horizon_profile,
    probe_dataset_from_drc,
    probe_dataset_from_engine,
    train_action_probe,
)
from .regression import CorrelationReport, OffsetReport, fit_offsets, label_regression, offset_regression, shift_grid
from .rollout import DrcEpisode, DrcPolicy, DrcStep, run_drc
from .stats import ConfidenceInterval, bootstrap_ci
from .steering import steer_weights

__all__ = [
    "ABLATION_TENSORS",
    "AblationResult",
    "AucReport",
    "AucRow",
    "BASE_FEATURES",
    "CombinedEncoder",
    "ConfidenceInterval",
    "CorrelationReport",
    "DirectEffect",
    "DrcContext",
    "DrcEpisode",
    "DrcPolicy",
    "DrcStep",
    "EngineContext",
    "FUTURE_FEATURES",
    "FeatureSet",
    "InterventionOutcome",
    "InterventionScore",
    "OffsetReport",
    "PROTOCOL_GROUPS",
    "ProbeFit",
    "RecordedStep",
    "Transition",
    "apply_ablation",
    "auc_probe",
    "bootstrap_ci",
    "build_features",
    "causal_intervene",
    "classify_horizon",
    "collect_drc_transitions",
    "collect_engine_transitions",
    "collect_means",
    "combine_encoder",
    "compare_cache_groups",
    "direct_effect",
    "fit_offsets",
    "gate_importance",
    "group_protocol",
    "horizon_profile",
    "interior_error",
    "intervention_score",
    "label_regression",
    "mean_replacements",
    "offset_regression",
    "probe_dataset_from_drc",
    "probe_dataset_from_engine",
    "reconstruct_pre",
    "run_drc",
    "shift_grid",
    "steer_weights",
    "steps_from_drc",
    "steps_from_episode",
    "train_action_probe",
    "two_stage_gate_input",
    "wta_slices",
    "zero_kernel_slices",
]
