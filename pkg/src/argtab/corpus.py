"""Corpora of event-annotated text.

Domain types (instances, events, marked text), readers for the common
preprocessed benchmark formats, event-wise record aggregation, and trigger
marking with context windowing.

All gold annotation uses word-level half-open spans ``(start, end)`` into the
instance's token list. The native interchange format is JSONL, one document
per line:

    {"doc_id": "...", "tokens": ["..."],
     "events": [{"trigger": [s, e], "type": "...",
                 "args": [{"role": "...", "span": [s, e]}]}]}
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .schema import SchemaRegistry, canonical_type

Span = tuple[int, int]

CORPUS_FORMATS = ("native-jsonl", "ace05", "rams", "wikievents", "mlee")


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid annotation."""


@dataclass(frozen=True)
class Argument:
    role: str
    span: Span


@dataclass(frozen=True)
class EventRecord:
    trigger: Span
    event_type: str
    arguments: tuple[Argument, ...] = ()

    def spans_by_role(self) -> dict[str, list[Span]]:
        by_role: dict[str, list[Span]] = {}
        for a in self.arguments:
            by_role.setdefault(a.role, []).append(a.span)
        return by_role


@dataclass(frozen=True)
class EAEInstance:
    """One context with all of its annotated events (N >= 1)."""

    doc_id: str
    text: tuple[str, ...]
    events: tuple[EventRecord, ...]

    def __post_init__(self):
        if len(self.events) == 0:
            raise CorpusError(f"doc {self.doc_id}: instance has no events")
        n = len(self.text)
        for ev in self.events:
            _check_span(ev.trigger, n, self.doc_id, "trigger")
            for arg in ev.arguments:
                _check_span(arg.span, n, self.doc_id, f"argument ({arg.role})")

    @property
    def num_events(self) -> int:
        return len(self.events)


def _check_span(span: Span, length: int, doc_id: str, what: str) -> None:
    s, e = span
    if not (0 <= s < e <= length):
        raise CorpusError(
            f"doc {doc_id}: {what} span ({s}, {e}) invalid for text of length {length}"
        )


def validate_roles(instances: list[EAEInstance], registry: SchemaRegistry) -> None:
    """Check event types against the registry and roles against role sets."""
    for inst in instances:
        for ev in inst.events:
            role_set = registry.role_set(ev.event_type)
            for arg in ev.arguments:
                if arg.role not in role_set:
                    raise CorpusError(
                        f"doc {inst.doc_id}: role {arg.role!r} not in role set "
                        f"of {ev.event_type!r}"
                    )


def total_events(instances: list[EAEInstance]) -> int:
    return sum(inst.num_events for inst in instances)


# ---------------------------------------------------------------------------
# Trigger marking
# ---------------------------------------------------------------------------

@dataclass
class MarkedText:
    """Subword sequence with sentinels and trigger markers inserted.

    ``word_spans`` maps each original word index inside the context window to
    its half-open subword span; ``marker_positions`` maps each marked-trigger
    ordinal (1-based, in order of occurrence) to the positions of its opening
    and closing marker tokens.
    """

    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    window: Span
    word_spans: dict[int, Span]
    marker_positions: dict[int, tuple[int, int]]
    trigger_ordinals: dict[Span, int]
    _word_of: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        word_of = {}
        for w, (s, e) in self.word_spans.items():
            for p in range(s, e):
                word_of[p] = w
        self._word_of = word_of

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text_positions(self) -> list[int]:
        """Subword positions holding original words (no sentinels/markers)."""
        return sorted(self._word_of)

    def stripped_tokens(self) -> list[str]:
        return [self.tokens[p] for p in self.text_positions]

    def trigger_subword_span(self, ordinal: int) -> Span:
        open_pos, close_pos = self.marker_positions[ordinal]
        return (open_pos + 1, close_pos)

    def word_span_to_subword(self, span: Span) -> Span | None:
        """Map a word-level span to subword positions; None if outside window."""
        s, e = span
        if s not in self.word_spans or (e - 1) not in self.word_spans:
            return None
        return (self.word_spans[s][0], self.word_spans[e - 1][1])

    def subword_span_to_word(self, start: int, end: int) -> Span | None:
        """Snap a half-open subword span to whole-word boundaries."""
        if start not in self._word_of or (end - 1) not in self._word_of:
            return None
        return (self._word_of[start], self._word_of[end - 1] + 1)

    def valid_span_starts(self) -> list[int]:
        return self.text_positions

    def valid_span_ends(self) -> list[int]:
        return [p + 1 for p in self.text_positions]


def mark_triggers(instance, selected, window, tokenizer) -> MarkedText:
    """Insert trigger markers around the selected events' triggers.

    Each distinct trigger span among the selected events is marked exactly
    once; ordinals count order of occurrence in the text. The text is cut to
    at most ``window`` words, centered on the midpoint of the trigger extent.
    A trigger that cannot be covered raises rather than being cut silently.
    """
    if not selected:
        raise ValueError("selected events must be non-empty")
    if window <= 0:
        raise ValueError("window must be positive")
    events = [instance.events[i] for i in selected]
    spans = sorted({ev.trigger for ev in events})
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise CorpusError(
                f"doc {instance.doc_id}: partially overlapping trigger spans "
                f"({s1}, {e1}) and ({s2}, {e2}) cannot both be marked"
            )
    lo = min(s for s, _ in spans)
    hi = max(e for _, e in spans)
    n = len(instance.text)

    if hi - lo > window:
        raise CorpusError(
            f"doc {instance.doc_id}: triggers span {hi - lo} words, more than "
            f"the context window ({window})"
        )
    w = min(window, n)
    lo_start = max(0, hi - w)
    hi_start = min(lo, n - w)
    centered = (lo + hi) // 2 - w // 2
    start = min(max(centered, lo_start), hi_start)
    end = start + w

    ordinals = {span: i + 1 for i, span in enumerate(spans)}
    opens = {s: ordinals[(s, e)] for (s, e) in spans}
    closes = {e: ordinals[(s, e)] for (s, e) in spans}

    tokens: list[str] = [tokenizer.bos_token]
    word_spans: dict[int, Span] = {}
    marker_open: dict[int, int] = {}
    marker_close: dict[int, int] = {}
    for j in range(start, end):
        if j in closes:
            marker_close[closes[j]] = len(tokens)
            tokens.append(tokenizer.marker_pair(closes[j])[1])
        if j in opens:
            marker_open[opens[j]] = len(tokens)
            tokens.append(tokenizer.marker_pair(opens[j])[0])
        pieces = tokenizer.tokenize_word(instance.text[j], is_first=(j == start))
        word_spans[j] = (len(tokens), len(tokens) + len(pieces))
        tokens.extend(pieces)
    if end in closes:
        marker_close[closes[end]] = len(tokens)
        tokens.append(tokenizer.marker_pair(closes[end])[1])
    tokens.append(tokenizer.eos_token)

    marker_positions = {i: (marker_open[i], marker_close[i]) for i in ordinals.values()}
    return MarkedText(
        tokens=tuple(tokens),
        token_ids=tuple(tokenizer.ids(tokens)),
        window=(start, end),
        word_spans=word_spans,
        marker_positions=marker_positions,
        trigger_ordinals=dict(ordinals),
    )


# ---------------------------------------------------------------------------
# Readers
# ---------------------------------------------------------------------------

def load_corpus(path, format="native-jsonl", registry=None) -> list[EAEInstance]:
    """Load a corpus file into normalized instances.

    ``format`` is one of ``native-jsonl``, ``ace05``, ``rams``, ``wikievents``
    or ``mlee``. When a registry is given, event types and roles are checked
    against it.
    """
    readers = {
        "native-jsonl": _read_native,
        "ace05": _read_ace05,
        "rams": _read_rams,
        "wikievents": _read_wikievents,
        "mlee": _read_wikievents,
    }
    if format not in readers:
        raise CorpusError(f"unknown corpus format {format!r}; expected one of {CORPUS_FORMATS}")
    instances = readers[format](Path(path))
    if registry is not None:
        for inst in instances:
            for ev in inst.events:
                if ev.event_type not in registry:
                    raise CorpusError(
                        f"doc {inst.doc_id}: unknown event type {ev.event_type!r}"
                    )
        validate_roles(instances, registry)
    return instances


def save_corpus(instances, path) -> None:
    """Write instances in the native JSONL format."""
    with open(path, "w") as f:
        for inst in instances:
            rec = {
                "doc_id": inst.doc_id,
                "tokens": list(inst.text),
                "events": [
                    {
                        "trigger": list(ev.trigger),
                        "type": ev.event_type,
                        "args": [{"role": a.role, "span": list(a.span)} for a in ev.arguments],
                    }
                    for ev in inst.events
                ],
            }
            f.write(json.dumps(rec) + "\n")


def _iter_jsonl(path: Path):
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({e})") from e


def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise CorpusError(f"{where}: missing field {key!r}")
    return obj[key]


def _read_native(path: Path) -> list[EAEInstance]:
    instances = []
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        doc_id = str(_get(obj, "doc_id", where))
        where = f"{where} (doc {doc_id})"
        tokens = tuple(_get(obj, "tokens", where))
        events = []
        for ev in _get(obj, "events", where):
            args = tuple(
                Argument(_get(a, "role", where), tuple(_get(a, "span", where)))
                for a in ev.get("args", [])
            )
            events.append(EventRecord(
                trigger=tuple(_get(ev, "trigger", where)),
                event_type=_get(ev, "type", where),
                arguments=args,
            ))
        instances.append(EAEInstance(doc_id, tokens, tuple(events)))
    return instances


def _read_ace05(path: Path) -> list[EAEInstance]:
    """Sentence-level reader for the standard preprocessed ACE05 shape.

    One document per line with ``sentences`` (token lists) and per-sentence
    ``events``; token offsets are document-level and argument ends inclusive.
    Each sentence with at least one event becomes one instance.
    """
    instances = []
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        doc_key = str(obj.get("doc_key", obj.get("doc_id", f"line{lineno}")))
        sentences = _get(obj, "sentences", f"{where} (doc {doc_key})")
        doc_events = _get(obj, "events", f"{where} (doc {doc_key})")
        if len(doc_events) != len(sentences):
            raise CorpusError(
                f"{where} (doc {doc_key}): events list does not align with sentences"
            )
        offset = 0
        for sent_idx, (sent, sent_events) in enumerate(zip(sentences, doc_events)):
            events = []
            for ev in sent_events:
                if not ev or len(ev[0]) < 2:
                    raise CorpusError(
                        f"{where} (doc {doc_key}): malformed event in sentence {sent_idx}"
                    )
                trig_tok, event_type = ev[0][0], ev[0][1]
                args = tuple(
                    Argument(role=a[2], span=(a[0] - offset, a[1] - offset + 1))
                    for a in ev[1:]
                )
                events.append(EventRecord(
                    trigger=(trig_tok - offset, trig_tok - offset + 1),
                    event_type=event_type,
                    arguments=args,
                ))
            if events:
                instances.append(EAEInstance(
                    doc_id=f"{doc_key}#s{sent_idx}",
                    text=tuple(sent),
                    events=tuple(events),
                ))
            offset += len(sent)
    return instances


_RAMS_ROLE_PREFIX = re.compile(r"^evt\d+arg\d+")


@dataclass(frozen=True)
class PerEventRecord:
    """One event-wise annotation row, prior to context aggregation."""

    context_id: str
    doc_id: str
    text: tuple[str, ...]
    event: EventRecord


def _read_rams(path: Path) -> list[EAEInstance]:
    """Reader for the event-wise document format: one event per line over a
    multi-sentence context, inclusive document-level token offsets."""
    records = []
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        doc_key = str(obj.get("doc_key", f"line{lineno}"))
        where = f"{where} (doc {doc_key})"
        sentences = _get(obj, "sentences", where)
        tokens = tuple(tok for sent in sentences for tok in sent)
        triggers = _get(obj, "evt_triggers", where)
        if len(triggers) != 1:
            raise CorpusError(f"{where}: expected exactly one trigger per record")
        ts, te, tinfo = triggers[0][0], triggers[0][1], triggers[0][2]
        event_type = tinfo[0][0]
        args = []
        for s, e, rinfo in _get(obj, "ent_spans", where):
            role = _RAMS_ROLE_PREFIX.sub("", rinfo[0][0])
            args.append(Argument(role=role, span=(s, e + 1)))
        record = PerEventRecord(
            context_id=hashlib.sha1("\x00".join(tokens).encode()).hexdigest(),
            doc_id=doc_key,
            text=tokens,
            event=EventRecord((ts, te + 1), event_type, tuple(args)),
        )
        records.append(record)
    return aggregate_rams(records)


def aggregate_rams(records: list[PerEventRecord]) -> list[EAEInstance]:
    """Merge event-wise records that share a context into multi-event instances.

    Events are ordered by trigger position. Records with the same context id
    but different texts are rejected.
    """
    by_context: dict[str, list[PerEventRecord]] = {}
    order: list[str] = []
    for rec in records:
        if rec.context_id not in by_context:
            order.append(rec.context_id)
            by_context[rec.context_id] = []
        elif by_context[rec.context_id][0].text != rec.text:
            raise CorpusError(
                f"doc {rec.doc_id}: conflicting texts under context id "
                f"{rec.context_id}"
            )
        by_context[rec.context_id].append(rec)
    instances = []
    for ctx in order:
        group = by_context[ctx]
        events = tuple(sorted((r.event for r in group), key=lambda ev: ev.trigger))
        instances.append(EAEInstance(group[0].doc_id, group[0].text, events))
    return instances


def _read_wikievents(path: Path) -> list[EAEInstance]:
    """Reader for document-level corpora with ``event_mentions`` records.

    Arguments either carry explicit ``start``/``end`` token offsets (end
    exclusive) or reference an entry of ``entity_mentions`` by ``entity_id``.
    Coreference links, when present, are ignored; only the exact argument
    annotations are used.
    """
    instances = []
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        doc_id = str(_get(obj, "doc_id", where))
        where = f"{where} (doc {doc_id})"
        tokens = tuple(_get(obj, "tokens", where))
        entities = {
            ent["id"]: (ent["start"], ent["end"])
            for ent in obj.get("entity_mentions", [])
        }
        events = []
        for ev in obj.get("event_mentions", []):
            trig = _get(ev, "trigger", where)
            args = []
            for a in ev.get("arguments", []):
                if "start" in a and "end" in a:
                    span = (a["start"], a["end"])
                elif a.get("entity_id") in entities:
                    span = entities[a["entity_id"]]
                else:
                    raise CorpusError(
                        f"{where}: argument of role {a.get('role')!r} has neither "
                        f"offsets nor a known entity_id"
                    )
                args.append(Argument(role=_get(a, "role", where), span=span))
            events.append(EventRecord(
                trigger=(trig["start"], trig["end"]),
                event_type=canonical_type(_get(ev, "event_type", where)),
                arguments=tuple(args),
            ))
        if events:
            events.sort(key=lambda e: e.trigger)
            instances.append(EAEInstance(doc_id, tokens, tuple(events)))
    return instances
