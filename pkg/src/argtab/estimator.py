"""Scikit-learn style estimator facade over the extraction framework.

``TableArgumentExtractor`` exposes fit/predict/score plus get_params and
set_params, so the extractor composes with sklearn tooling (cloning, grid
search over e.g. scheme or ablation toggles). X is a list of ``EAEInstance``
objects; the gold arguments inside them are the supervision, so ``y`` is
always None.
"""

from __future__ import annotations

import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import EAEInstance
from .evaluation import evaluate, score as score_fn
from .modeling import ModelConfig, TextTableModel, load_checkpoint, save_checkpoint
from .schema import SchemaRegistry, mlee_registry, synth_registry
from .schemes import (Pipeline, SchemeConfig, Toggles, TrainConfig, predict_corpus,
                      train)
from .tokenization import WordTokenizer


def _resolve_registry(registry) -> SchemaRegistry:
    if isinstance(registry, SchemaRegistry):
        return registry
    if registry in (None, "synth"):
        return synth_registry()
    if registry == "mlee":
        return mlee_registry()
    return SchemaRegistry.from_file(registry)


def _check_instances(X) -> list[EAEInstance]:
    instances = list(X)
    if not instances:
        raise ValueError("X must contain at least one instance")
    for item in instances:
        if not isinstance(item, EAEInstance):
            raise TypeError(f"expected EAEInstance items, got {type(item).__name__}")
    return instances


class TableArgumentExtractor(BaseEstimator):
    """Event argument extractor trained with a (train, infer) scheme.

    Parameters mirror the training and model configuration; ``None`` means
    "use the profile's default". The ``desk`` profile is a small randomly
    initialized stack for CPU-scale work; the ``paper`` profile splits a
    pretrained 24-layer masked LM into a 17-layer encoder and 7-layer decoder.
    """

    def __init__(self, scheme="multi-single", profile="desk", registry=None,
                 steps=None, learning_rate=None, batch_size=None, seed=42,
                 warmup_ratio=None, max_grad_norm=None, context_window=250,
                 max_span_len=10, max_encoder_len=None, max_decoder_len=None,
                 eval_interval=None,
                 hidden_size=64, num_heads=4, encoder_layers=2, decoder_layers=2,
                 ffn_size=128, dropout=0.1, table_positions="fresh",
                 use_structure_mask=True, use_precomputed_encodings=True,
                 use_prompts=True, pretrained_name="roberta-large"):
        self.scheme = scheme
        self.profile = profile
        self.registry = registry
        self.steps = steps
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.warmup_ratio = warmup_ratio
        self.max_grad_norm = max_grad_norm
        self.context_window = context_window
        self.max_span_len = max_span_len
        self.max_encoder_len = max_encoder_len
        self.max_decoder_len = max_decoder_len
        self.eval_interval = eval_interval
        self.hidden_size = hidden_size
        self.num_heads = num_heads
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers
        self.ffn_size = ffn_size
        self.dropout = dropout
        self.table_positions = table_positions
        self.use_structure_mask = use_structure_mask
        self.use_precomputed_encodings = use_precomputed_encodings
        self.use_prompts = use_prompts
        self.pretrained_name = pretrained_name

    # ------------------------------------------------------------------
    def _train_config(self) -> TrainConfig:
        cfg = TrainConfig.desk() if self.profile == "desk" else TrainConfig()
        for name in ("steps", "learning_rate", "batch_size", "warmup_ratio",
                     "max_grad_norm", "max_encoder_len", "max_decoder_len",
                     "eval_interval"):
            value = getattr(self, name)
            if value is not None:
                setattr(cfg, name, value)
        cfg.seed = self.seed
        cfg.context_window = self.context_window
        cfg.max_span_len = self.max_span_len
        return cfg

    def _toggles(self) -> Toggles:
        return Toggles(structure_mask=self.use_structure_mask,
                       precomputed_encodings=self.use_precomputed_encodings,
                       prompts=self.use_prompts)

    def _build_pipeline(self, instances, dev, cfg: TrainConfig) -> Pipeline:
        registry = _resolve_registry(self.registry)
        if self.profile == "desk":
            torch.manual_seed(cfg.seed)
            tokenizer = WordTokenizer.build(instances + (dev or []), registry)
            model = TextTableModel(ModelConfig.desk(
                vocab_size=tokenizer.vocab_size,
                hidden_size=self.hidden_size, num_heads=self.num_heads,
                encoder_layers=self.encoder_layers, decoder_layers=self.decoder_layers,
                ffn_size=self.ffn_size, dropout=self.dropout,
                table_positions=self.table_positions,
            ))
        elif self.profile == "paper":
            from .modeling import split_pretrained
            model, tokenizer = split_pretrained(
                self.pretrained_name, table_positions=self.table_positions)
        else:
            raise ValueError(f"unknown profile {self.profile!r}; expected 'desk' or 'paper'")
        return Pipeline(model, tokenizer, registry, toggles=self._toggles(),
                        max_span_len=cfg.max_span_len,
                        max_encoder_len=cfg.max_encoder_len,
                        max_decoder_len=cfg.max_decoder_len)

    # ------------------------------------------------------------------
    def fit(self, X, y=None, dev=None):
        """Train on a corpus of instances; gold arguments come from X itself."""
        instances = _check_instances(X)
        dev_instances = _check_instances(dev) if dev else None
        scheme = SchemeConfig.parse(self.scheme)
        cfg = self._train_config()
        pipeline = self._build_pipeline(instances, dev_instances, cfg)
        history = train(instances, scheme, cfg, pipeline, dev=dev_instances)
        self.pipeline_ = pipeline
        self.scheme_ = scheme
        self.train_config_ = cfg
        self.history_ = history
        return self

    def predict(self, X):
        """Per-instance, per-event argument lists: (role, word span, score)."""
        check_is_fitted(self)
        instances = _check_instances(X)
        return predict_corpus(instances, self.scheme_, self.pipeline_,
                              self.train_config_.context_window)

    def score(self, X, y=None) -> float:
        """Arg-C micro-F1 on X (the sklearn model-selection scalar)."""
        check_is_fitted(self)
        instances = _check_instances(X)
        return score_fn(instances, self.predict(instances)).arg_c.f1

    def evaluate(self, X, analyses=("event_count", "overlap", "distance")):
        """Full evaluation report with the requested analysis tables."""
        check_is_fitted(self)
        instances = _check_instances(X)
        return evaluate(instances, self.predict(instances), analyses=analyses)

    # ------------------------------------------------------------------
    def save(self, path) -> None:
        check_is_fitted(self)
        params = self.get_params(deep=False)
        params.pop("registry", None)  # registry records travel in the checkpoint
        save_checkpoint(path, self.pipeline_.model, self.pipeline_.tokenizer,
                        self.pipeline_.registry, extra={
                            "scheme": self.scheme_.name,
                            "toggles": self.pipeline_.toggles.to_dict(),
                            "train_config": self.train_config_.to_dict(),
                            "params": params,
                        })

    @classmethod
    def load(cls, path) -> "TableArgumentExtractor":
        model, tokenizer, registry, extra = load_checkpoint(path)
        params = dict(extra.get("params", {}))
        params.pop("registry", None)
        est = cls(**params)
        est.scheme_ = SchemeConfig.parse(extra["scheme"])
        est.train_config_ = TrainConfig(**extra["train_config"])
        est.pipeline_ = Pipeline(
            model, tokenizer, registry,
            toggles=Toggles(**extra.get("toggles", {})),
            max_span_len=est.train_config_.max_span_len,
            max_encoder_len=est.train_config_.max_encoder_len,
            max_decoder_len=est.train_config_.max_decoder_len,
        )
        est.history_ = []
        return est
