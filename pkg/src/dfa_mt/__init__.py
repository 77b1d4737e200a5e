"""Dynamic focus anchoring for LLM machine translation.

Find the context-sensitive words of a source sentence (polysemous words from
a bilingual lexicon, domain and culture terms elicited from the model), name
them in the translation prompt, and score the outputs.
"""
from .csu import CsuIdentifier, CsuKind, CsuRecord, CsuSet, assemble_csu_set
from .embeddings import EmbeddingTable, cosine_similarity, load_embeddings
from .experiment import (ExperimentConfig, FocusAnchoredTranslator, k_sweep, load_config,
                         render_report, run_ablation_suite, run_system)
from .lexicon import TranslationMap, multi_translation_set, parse_lexicon
from .llm_client import BackendConfig, LLMClient, detect_task_failure, extract_translation
from .metrics import Corpus, bleu, chrf2, score_corpus
from .prompts import PromptTemplateSet, build_base_prompt, build_enhanced_prompt, default_templates
from .semantic_filter import ClusterParams, PolysemyFilter, build_polysemous_csu_set, cluster_translations

__all__ = [
    "BackendConfig",
    "ClusterParams",
    "Corpus",
    "CsuIdentifier",
    "CsuKind",
    "CsuRecord",
    "CsuSet",
    "EmbeddingTable",
    "ExperimentConfig",
    "FocusAnchoredTranslator",
    "LLMClient",
    "PolysemyFilter",
    "PromptTemplateSet",
    "TranslationMap",
    "assemble_csu_set",
    "bleu",
    "build_base_prompt",
    "build_enhanced_prompt",
    "build_polysemous_csu_set",
    "chrf2",
    "cluster_translations",
    "cosine_similarity",
    "default_templates",
    "detect_task_failure",
    "extract_translation",
    "k_sweep",
    "load_config",
    "load_embeddings",
    "multi_translation_set",
    "parse_lexicon",
    "render_report",
    "run_ablation_suite",
    "run_system",
    "score_corpus",
]

__version__ = "0.1.0"
