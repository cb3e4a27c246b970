"""Deterministic synthetic corpora for desk-scale training and tests.

The generated instances cover the annotation patterns that matter for the
model: single- and multi-event contexts, events sharing an argument span,
arguments that are another event's trigger (nested events), events sharing a
trigger, and repeated roles up to the prompt's column capacity.
"""

from __future__ import annotations

import random

from .corpus import Argument, CorpusError, EAEInstance, EventRecord
from .schema import synth_registry

FILLER = (
    "the", "a", "on", "in", "near", "yesterday", "reportedly", "then",
    "later", "quietly", "again", "north", "of", "old", "small",
)

ENTITIES = (
    "smith", "jones", "rivera", "osman", "chen", "patel", "mara", "ito",
    "convoy", "village", "harbor", "bridge", "market", "depot", "clinic",
    "council", "militia", "crew", "cartel", "guild", "rifles", "mortars",
    "trucks", "grain", "fuel", "medicine", "delta", "ridge", "valley",
)

TRIGGERS = {
    "attack": ("attacked", "bombed", "raided", "struck"),
    "transport": ("moved", "shipped", "carried", "hauled"),
    "meet": ("met", "gathered", "convened"),
    "growth": ("grew", "expanded"),
}

# Weighted type pool: the roleless "growth" type stays rare but present so
# degenerate rows (trigger, no slots) occur in training data.
TYPE_POOL = ("attack", "attack", "transport", "transport", "meet", "meet", "growth")


def default_vocab() -> list[str]:
    vocab = list(FILLER) + list(ENTITIES)
    for words in TRIGGERS.values():
        vocab.extend(words)
    return vocab


def synth_corpus(seed, n_instances, max_events=3, vocab=None, schema=None) -> list[EAEInstance]:
    """Generate ``n_instances`` synthetic instances, deterministic under seed."""
    if max_events < 1:
        raise ValueError("max_events must be >= 1")
    schema = schema or synth_registry()
    if vocab is None:
        vocab = default_vocab()
    entities = [w for w in vocab if w in set(ENTITIES)] or list(vocab)
    filler = [w for w in vocab if w in set(FILLER)] or list(vocab)
    if len(vocab) < 10:
        raise CorpusError("vocab too small to realize the schema (need >= 10 tokens)")
    types = [t for t in TYPE_POOL if t in schema]
    if not types:
        raise CorpusError("schema has none of the synthetic event types")

    rng = random.Random(seed)
    instances = []
    for idx in range(n_instances):
        instances.append(_gen_instance(f"synth-{seed}-{idx:04d}", rng, max_events,
                                       schema, types, entities, filler))
    return instances


def _gen_instance(doc_id, rng, max_events, schema, types, entities, filler):
    n_events = rng.randint(1, max_events)
    words: list[str] = []

    def emit_filler(k):
        for _ in range(k):
            words.append(rng.choice(filler))

    def emit_entity():
        start = len(words)
        for _ in range(rng.choice((1, 1, 2))):
            words.append(rng.choice(entities))
        return (start, len(words))

    emit_filler(rng.randint(1, 3))
    raw_events: list[tuple[tuple[int, int], str, list[Argument]]] = []
    for _ in range(n_events):
        event_type = rng.choice(types)
        prompt = schema.prompt(event_type)
        if raw_events and rng.random() < 0.12:
            trigger = raw_events[rng.randrange(len(raw_events))][0]
        else:
            emit_filler(rng.randint(0, 2))
            t0 = len(words)
            words.append(rng.choice(TRIGGERS[event_type]))
            trigger = (t0, t0 + 1)
        args: list[Argument] = []
        for mention in prompt.role_mentions:
            if rng.random() >= 0.6:
                continue
            r = rng.random()
            prior_args = [a for t, _, evargs in raw_events for a in evargs
                          if t != trigger]
            if prior_args and r < 0.25:
                span = rng.choice(prior_args).span
            elif raw_events and r < 0.4:
                other = [t for t, _, _ in raw_events if t != trigger]
                if not other:
                    continue
                span = rng.choice(other)
            else:
                emit_filler(rng.randint(0, 1))
                span = emit_entity()
            args.append(Argument(mention.role, span))
        raw_events.append((trigger, event_type, args))
    emit_filler(rng.randint(1, 2))

    raw_events.sort(key=lambda item: item[0])
    events = tuple(
        EventRecord(trigger, event_type, tuple(args))
        for trigger, event_type, args in raw_events
    )
    return EAEInstance(doc_id, tuple(words), events)
