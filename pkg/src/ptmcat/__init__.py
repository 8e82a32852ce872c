"""Categorise pre-trained models by pipeline tag from their model cards and
map them to software-engineering tasks by name similarity."""

from .classifiers import ClassifierModel, predict, predict_scores, train_cnb, train_svc
from .evaluation import CvReport, FoldMetrics, PipelineConfig, compute_metrics, evaluate_cv, make_folds
from .features import DocVector, FeatureSpace, fit, preprocess, transform
from .filtering import FilterReport, FilterThresholds, apply_thresholds, compute_thresholds, drop_missing, filter_registry
from .mapping import MappingEntry, MatchResult, dominant_tag, explain_mapping, find_similar, levenshtein, map_task, name_similarity
from .registry import IngestOptions, PtmRecord, Registry, ingest, ingest_csv, registry_stats
from .taxonomy import EvidenceDoc, KeywordQuery, TaxonomyEntry, load_evidence, load_taxonomy, screen, tasks_for_ptm

__version__ = "0.1.0"
