"""Event argument extraction by slot-table filling.

Given text and event triggers, the extractor marks the triggers, builds a
slotted table from per-event-type prompts, decodes it non-autoregressively
under a structure-aware attention mask, and fills each argument slot with a
text span (or the empty span). Training assigns golden spans to same-role
slots via the Hungarian algorithm.
"""

from .corpus import (Argument, CorpusError, EAEInstance, EventRecord, MarkedText,
                     aggregate_rams, load_corpus, mark_triggers, save_corpus,
                     total_events)
from .estimator import TableArgumentExtractor
from .evaluation import EvalReport, evaluate, score
from .masking import StructureMask, build_structure_mask
from .modeling import ModelConfig, TextTableModel, load_checkpoint, save_checkpoint
from .schema import PromptTemplate, SchemaError, SchemaRegistry, mlee_registry, synth_registry
from .schemes import (Pipeline, SchemeConfig, Toggles, TrainConfig, expand_instances,
                      predict_corpus, train)
from .spans import SpanPrediction, bipartite_loss, hungarian_assign, select_span
from .synth import synth_corpus
from .table import SlotCell, SlottedTable, build_column_header, build_table
from .tokenization import WordTokenizer

__version__ = "0.1.0"

__all__ = [
    "Argument", "CorpusError", "EAEInstance", "EventRecord", "MarkedText",
    "aggregate_rams", "load_corpus", "mark_triggers", "save_corpus", "total_events",
    "TableArgumentExtractor",
    "EvalReport", "evaluate", "score",
    "StructureMask", "build_structure_mask",
    "ModelConfig", "TextTableModel", "load_checkpoint", "save_checkpoint",
    "PromptTemplate", "SchemaError", "SchemaRegistry", "mlee_registry", "synth_registry",
    "Pipeline", "SchemeConfig", "Toggles", "TrainConfig", "expand_instances",
    "predict_corpus", "train",
    "SpanPrediction", "bipartite_loss", "hungarian_assign", "select_span",
    "synth_corpus",
    "SlotCell", "SlottedTable", "build_column_header", "build_table",
    "WordTokenizer",
]
