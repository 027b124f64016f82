"""Cost-sensitive sequencing of feature groups for anytime linear prediction."""

from .dataset import Dataset, Group, GroupStructure, SynthConfig, center_responses, load_csv, whiten_groups
from .glm import GlmModel, GlmSpec, MeanFunction, glm_fit, sequence_omp_glm
from .grouplasso import lasso_path, solve_weighted_group_lasso
from .metrics import PerformanceCurve, alpha_stopping_cost, oracle_reorder, timeliness
from .sequencer import SelectionRule, SequencingResult, sequence_fr, sequence_omp
from .theory import check_theorem_bound

__all__ = [
    "Dataset", "Group", "GroupStructure", "SynthConfig", "center_responses", "load_csv", "whiten_groups",
    "GlmModel", "GlmSpec", "MeanFunction", "glm_fit", "sequence_omp_glm",
    "lasso_path", "solve_weighted_group_lasso",
    "PerformanceCurve", "alpha_stopping_cost", "oracle_reorder", "timeliness",
    "SelectionRule", "SequencingResult", "sequence_fr", "sequence_omp",
    "check_theorem_bound",
]
