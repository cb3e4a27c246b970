"""Training-inference schemes and the training loop.

Instances expand into model samples per the training mode: ``single`` marks
one event's trigger per sample and fills only that event's slots; ``multi``
marks all triggers of the instance and decodes every event from one table.
The supported (train, infer) pairs are single-single, multi-multi and
multi-single.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

import torch

from .corpus import CorpusError, EAEInstance, MarkedText, mark_triggers
from .masking import all_true_mask, build_structure_mask
from .modeling import TextTableModel
from .schema import SchemaRegistry
from .spans import assign_golden_spans, bipartite_loss, select_span
from .table import SlottedTable, build_table, init_table_embeddings

VALID_SCHEMES = ("single-single", "multi-multi", "multi-single")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    train_mode: str
    infer_mode: str

    def __post_init__(self):
        if self.name not in VALID_SCHEMES:
            raise ValueError(
                f"unsupported scheme {self.name!r}; valid schemes: "
                f"{', '.join(VALID_SCHEMES)}"
            )

    @property
    def name(self) -> str:
        return f"{self.train_mode}-{self.infer_mode}"

    @classmethod
    def parse(cls, name: str) -> "SchemeConfig":
        parts = name.split("-")
        if len(parts) != 2:
            raise ValueError(
                f"unsupported scheme {name!r}; valid schemes: "
                f"{', '.join(VALID_SCHEMES)}"
            )
        return cls(parts[0], parts[1])


@dataclass
class TrainConfig:
    """Optimization and sizing hyperparameters (defaults: paper profile)."""

    steps: int = 10000
    warmup_ratio: float = 0.1
    learning_rate: float = 2e-5
    max_grad_norm: float = 5.0
    batch_size: int = 4
    context_window: int = 250
    max_span_len: int = 10
    max_encoder_len: int = 500
    max_decoder_len: int = 360
    seed: int = 42
    cross_attention_lr_mult: float = 1.5
    eval_interval: int = 500

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.context_window < 1:
            raise ValueError("steps, batch_size and context_window must be positive")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        base = dict(
            steps=400, learning_rate=1e-3, batch_size=8,
            max_encoder_len=256, max_decoder_len=256, eval_interval=100,
        )
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Toggles:
    """Ablation switches (all on by default)."""

    structure_mask: bool = True       # masked table self-attention vs all-true
    precomputed_encodings: bool = True  # table init from encoder outputs vs token embeddings
    prompts: bool = True              # prompt header vs bare role names

    @classmethod
    def from_flags(cls, no_saam=False, no_pet=False, no_prompts=False) -> "Toggles":
        return cls(structure_mask=not no_saam,
                   precomputed_encodings=not no_pet,
                   prompts=not no_prompts)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Sample:
    """One model input: an instance with a subset of its events targeted."""

    instance: EAEInstance
    event_indices: tuple[int, ...]
    marked: MarkedText
    # weight-independent artifacts (table layout, mask), filled by the pipeline
    static_cache: tuple | None = None


def expand_instances(instance: EAEInstance, mode: str, window: int,
                     tokenizer) -> list[Sample]:
    """Expand an instance into samples for the given mode.

    ``single``: one sample per event, marking only that event's trigger;
    ``multi``: one sample marking all triggers, targeting all events.
    """
    if mode == "single":
        return [
            Sample(instance, (i,), mark_triggers(instance, [i], window, tokenizer))
            for i in range(instance.num_events)
        ]
    if mode == "multi":
        indices = tuple(range(instance.num_events))
        return [Sample(instance, indices,
                       mark_triggers(instance, list(indices), window, tokenizer))]
    raise ValueError(f"unknown mode {mode!r}; expected 'single' or 'multi'")


@dataclass
class ForwardOutput:
    sample: Sample
    table: SlottedTable
    text_encoding: torch.Tensor
    context: torch.Tensor
    start_logits: torch.Tensor
    end_logits: torch.Tensor


class Pipeline:
    """Model plus the fixed context needed to run samples through it."""

    def __init__(self, model: TextTableModel, tokenizer, registry: SchemaRegistry,
                 toggles: Toggles | None = None, max_span_len: int = 10,
                 max_encoder_len: int | None = None,
                 max_decoder_len: int | None = None):
        self.model = model
        self.tokenizer = tokenizer
        self.registry = registry
        self.toggles = toggles or Toggles()
        self.max_span_len = max_span_len
        self.max_encoder_len = max_encoder_len
        self.max_decoder_len = max_decoder_len

    def _prompt_matrix(self, event_type: str, cache=None) -> torch.Tensor:
        """Encoder output (or raw embeddings) for one prompt, sentinels cut."""
        if cache is not None and event_type in cache:
            return cache[event_type]
        template = self.registry.prompt(event_type)
        if not self.toggles.prompts:
            template = template.bare_role_variant()
        tokens = [self.tokenizer.bos_token]
        for i, word in enumerate(template.words):
            tokens.extend(self.tokenizer.tokenize_word(word, is_first=(i == 0)))
        tokens.append(self.tokenizer.eos_token)
        ids = self.tokenizer.ids(tokens)
        if self.toggles.precomputed_encodings:
            matrix = self.model.encode(ids)[1:-1]
        else:
            matrix = self.model.token_embedding_lookup(ids)[1:-1]
        if cache is not None:
            cache[event_type] = matrix
        return matrix

    def _table_and_mask(self, sample: Sample):
        """Table layout and attention mask are weight-independent; build once."""
        key = (self.toggles.prompts, self.toggles.structure_mask, self.max_decoder_len)
        if sample.static_cache is not None and sample.static_cache[0] == key:
            return sample.static_cache[1], sample.static_cache[2]
        events = [(i, sample.instance.events[i]) for i in sample.event_indices]
        table = build_table(sample.marked, events, self.registry, self.tokenizer,
                            use_prompts=self.toggles.prompts,
                            max_len=self.max_decoder_len)
        mask = (build_structure_mask(table) if self.toggles.structure_mask
                else all_true_mask(len(table)))
        sample.static_cache = (key, table, mask)
        return table, mask

    def forward(self, sample: Sample, cache=None) -> ForwardOutput:
        marked = sample.marked
        if self.max_encoder_len is not None and len(marked) > self.max_encoder_len:
            raise CorpusError(
                f"doc {sample.instance.doc_id}: marked text has {len(marked)} "
                f"tokens, over the encoder limit {self.max_encoder_len}; "
                f"use a smaller context window"
            )
        text_encoding = self.model.encode(marked.token_ids)
        context = self.model.contextualize(text_encoding)
        table, mask = self._table_and_mask(sample)
        prompt_encodings = {
            event_type: self._prompt_matrix(event_type, cache)
            for event_type, _ in table.header.prompt_spans
        }
        if self.toggles.precomputed_encodings:
            text_source = text_encoding
        else:
            text_source = self.model.token_embedding_lookup(marked.token_ids)
        embedding = init_table_embeddings(table, prompt_encodings, text_source, marked)
        h_table = self.model.decode_table(embedding.matrix, mask, text_encoding)
        h_slots = h_table[table.slot_positions]
        start_logits, end_logits = self.model.span_head.logits(h_slots, context)
        return ForwardOutput(sample, table, text_encoding, context,
                             start_logits, end_logits)

    def golden_assignment(self, out: ForwardOutput, cost_mode="logit"):
        """Hungarian-assign golden spans to slots, per event and role group.

        Golden arguments that fall outside the context window cannot be
        selected and are dropped from the targets.
        """
        marked = out.sample.marked
        table = out.table
        assignment = [None] * len(table.slot_positions)
        base = 0
        for row in table.rows:
            event = out.sample.instance.events[row.event_index]
            golden_by_role: dict[str, list[tuple[int, int]]] = {}
            for arg in event.arguments:
                sub = marked.word_span_to_subword(arg.span)
                if sub is not None:
                    golden_by_role.setdefault(arg.role, []).append(sub)
            k = len(row.slots)
            rows_idx = list(range(base, base + k))
            part = assign_golden_spans(
                out.start_logits[rows_idx], out.end_logits[rows_idx],
                [s.role for s in row.slots], golden_by_role, cost_mode=cost_mode,
            )
            assignment[base:base + k] = part
            base += k
        return assignment

    def loss(self, sample: Sample, cost_mode="logit") -> torch.Tensor:
        out = self.forward(sample)
        finite = torch.isfinite(out.start_logits).all() & torch.isfinite(out.end_logits).all()
        if not bool(finite):
            # surface divergence as a non-finite loss; the trainer aborts on it
            return (out.start_logits.sum() + out.end_logits.sum()) * float("nan")
        assignment = self.golden_assignment(out, cost_mode=cost_mode)
        return bipartite_loss(out.start_logits, out.end_logits, assignment)

    def decode(self, out: ForwardOutput):
        """Per-event argument predictions from one forward pass.

        Returns ``{event_index: [(role, (word_start, word_end), score), ...]}``
        with empty-span slots dropped.
        """
        marked = out.sample.marked
        starts = marked.valid_span_starts()
        ends = marked.valid_span_ends()
        results = {i: [] for i in out.sample.event_indices}
        slot_iter = 0
        for row in out.table.rows:
            for slot in row.slots:
                pred = select_span(
                    out.start_logits[slot_iter].detach(),
                    out.end_logits[slot_iter].detach(),
                    max_span_len=self.max_span_len,
                    valid_starts=starts, valid_ends=ends,
                )
                slot_iter += 1
                if pred.is_empty:
                    continue
                span = marked.subword_span_to_word(pred.start, pred.end)
                if span is None:
                    continue
                results[row.event_index].append((slot.role, span, pred.score))
        return results

    def predict_instance(self, instance: EAEInstance, infer_mode: str,
                         window: int, cache=None):
        """Argument predictions for every event, ordered as in the instance."""
        samples = expand_instances(instance, infer_mode, window, self.tokenizer)
        merged: dict[int, list] = {}
        with torch.no_grad():
            for sample in samples:
                merged.update(self.decode(self.forward(sample, cache=cache)))
        return [merged[i] for i in range(instance.num_events)]


def predict_corpus(instances, scheme: SchemeConfig, pipeline: Pipeline,
                   window: int):
    """Predictions for a corpus under the scheme's inference mode."""
    pipeline.model.eval()
    cache: dict = {}
    return [
        pipeline.predict_instance(inst, scheme.infer_mode, window, cache=cache)
        for inst in instances
    ]


def _linear_schedule(step: int, total: int, warmup: int) -> float:
    if step < warmup:
        return step / max(1, warmup)
    return max(0.0, (total - step) / max(1, total - warmup))


def build_optimizer(model: TextTableModel, cfg: TrainConfig):
    """AdamW over two groups: cross-attention runs at a boosted learning rate."""
    cross_ids = {id(p) for p in model.cross_attention_parameters()}
    base = [p for p in model.parameters() if id(p) not in cross_ids]
    cross = [p for p in model.parameters() if id(p) in cross_ids]
    return torch.optim.AdamW([
        {"params": base, "lr": cfg.learning_rate},
        {"params": cross, "lr": cfg.learning_rate * cfg.cross_attention_lr_mult},
    ])


def train(corpus, scheme: SchemeConfig, cfg: TrainConfig, pipeline: Pipeline,
          dev=None, log=None) -> list[dict]:
    """Optimize the bipartite loss for ``cfg.steps`` steps.

    AdamW with linear warmup/decay; the newly initialized cross-attention
    parameter group runs at ``cross_attention_lr_mult`` times the base
    learning rate; gradients are clipped to ``cfg.max_grad_norm``. When a dev
    set is given, dev Arg-C is evaluated every ``eval_interval`` steps and the
    best-scoring weights are restored at the end. Returns the metrics history.
    """
    from .evaluation import score as score_fn

    if not corpus:
        raise ValueError("training corpus is empty")
    model = pipeline.model
    samples = [
        s for inst in corpus
        for s in expand_instances(inst, scheme.train_mode, cfg.context_window,
                                  pipeline.tokenizer)
    ]
    history: list[dict] = []
    if cfg.steps == 0:
        return history

    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    optimizer = build_optimizer(model, cfg)
    warmup = int(cfg.steps * cfg.warmup_ratio)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: _linear_schedule(step, cfg.steps, warmup))

    order: list[int] = []
    best_dev, best_state = -1.0, None
    model.train()
    for step in range(1, cfg.steps + 1):
        batch = []
        for _ in range(cfg.batch_size):
            if not order:
                order = list(range(len(samples)))
                rng.shuffle(order)
            batch.append(samples[order.pop()])
        loss = torch.stack([pipeline.loss(s) for s in batch]).mean()
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
        optimizer.step()
        scheduler.step()

        record = {"step": step, "loss": float(loss.item()),
                  "lr": float(optimizer.param_groups[0]["lr"])}
        if dev is not None and (step % cfg.eval_interval == 0 or step == cfg.steps):
            model.eval()
            preds = predict_corpus(dev, scheme, pipeline, cfg.context_window)
            report = score_fn(dev, preds)
            model.train()
            record["dev_arg_c"] = report.arg_c.f1
            if report.arg_c.f1 > best_dev:
                best_dev = report.arg_c.f1
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        history.append(record)
        if log is not None:
            log(record)

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return history
