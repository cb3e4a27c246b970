"""Event-type schema registry: per-type prompts and the role columns they define.

The registry is a JSON file with one record per event type:

    {"type": "Gene_expression",
     "prompt": "expression of Gene and Gene ( and Gene )",
     "role_mentions": [{"role": "Gene", "char_start": 14, "char_end": 18}, ...]}

Each role mention becomes one argument column; a role repeated in the prompt
yields that many columns, which caps how many arguments of that role a single
event can carry. The role set of a type is the set of distinct mention roles.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class SchemaError(ValueError):
    """Raised for malformed registry files or unknown event types."""


def canonical_type(name: str) -> str:
    """Normalize an event-type name: spaces and hyphens become underscores."""
    return name.strip().replace(" ", "_").replace("-", "_")


@dataclass(frozen=True)
class RoleMention:
    role: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class PromptTemplate:
    """A natural-language prompt for one event type.

    ``words`` is the whitespace tokenization of the prompt and
    ``mention_word_spans`` gives, per role mention, the half-open word span it
    covers. Mentions must align to word boundaries and may not overlap.
    """

    event_type: str
    text: str
    role_mentions: tuple[RoleMention, ...]
    words: tuple[str, ...] = field(init=False)
    mention_word_spans: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        words, spans = _split_words(self.text)
        object.__setattr__(self, "words", tuple(words))
        mention_spans = []
        prev_end = 0
        for m in self.role_mentions:
            if not (0 <= m.char_start < m.char_end <= len(self.text)):
                raise SchemaError(
                    f"{self.event_type}: role mention {m.role!r} span "
                    f"({m.char_start}, {m.char_end}) outside prompt"
                )
            if m.char_start < prev_end:
                raise SchemaError(
                    f"{self.event_type}: role mentions overlap or are out of order"
                )
            prev_end = m.char_end
            covered = [
                i for i, (ws, we) in enumerate(spans)
                if ws < m.char_end and we > m.char_start
            ]
            if not covered:
                raise SchemaError(f"{self.event_type}: empty role mention {m.role!r}")
            lo, hi = covered[0], covered[-1] + 1
            if spans[lo][0] != m.char_start or spans[hi - 1][1] != m.char_end:
                raise SchemaError(
                    f"{self.event_type}: mention {m.role!r} does not align to "
                    f"word boundaries in {self.text!r}"
                )
            mention_spans.append((lo, hi))
        object.__setattr__(self, "mention_word_spans", tuple(mention_spans))

    @property
    def role_set(self) -> frozenset[str]:
        return frozenset(m.role for m in self.role_mentions)

    def role_capacity(self, role: str) -> int:
        return sum(1 for m in self.role_mentions if m.role == role)

    def bare_role_variant(self) -> "PromptTemplate":
        """Prompt stripped to the concatenation of its role names.

        Used by the header ablation that replaces prompts with bare roles;
        column count and order are preserved.
        """
        parts, mentions, pos = [], [], 0
        for m in self.role_mentions:
            name = self.text[m.char_start:m.char_end]
            mentions.append(RoleMention(m.role, pos, pos + len(name)))
            parts.append(name)
            pos += len(name) + 1
        return PromptTemplate(self.event_type, " ".join(parts), tuple(mentions))


def _split_words(text: str) -> tuple[list[str], list[tuple[int, int]]]:
    words, spans, i = [], [], 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < len(text) and not text[j].isspace():
            j += 1
        words.append(text[i:j])
        spans.append((i, j))
        i = j
    return words, spans


class SchemaRegistry:
    """Read-only lookup from event type to its prompt template."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = dict(templates)

    def __contains__(self, event_type: str) -> bool:
        return canonical_type(event_type) in self._templates

    def __len__(self) -> int:
        return len(self._templates)

    @property
    def event_types(self) -> list[str]:
        return sorted(self._templates)

    def prompt(self, event_type: str) -> PromptTemplate:
        key = canonical_type(event_type)
        if key not in self._templates:
            raise SchemaError(f"unknown event type: {event_type!r}")
        return self._templates[key]

    def role_set(self, event_type: str) -> frozenset[str]:
        return self.prompt(event_type).role_set

    def content_hash(self) -> str:
        """Stable sha256 over the registry records, for run manifests."""
        blob = json.dumps(self.to_records(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_records(self) -> list[dict]:
        recs = []
        for key in sorted(self._templates):
            t = self._templates[key]
            recs.append({
                "type": t.event_type,
                "prompt": t.text,
                "role_mentions": [
                    {"role": m.role, "char_start": m.char_start, "char_end": m.char_end}
                    for m in t.role_mentions
                ],
            })
        return recs

    @classmethod
    def from_records(cls, records: list[dict]) -> "SchemaRegistry":
        templates: dict[str, PromptTemplate] = {}
        for rec in records:
            try:
                t = PromptTemplate(
                    event_type=canonical_type(rec["type"]),
                    text=rec["prompt"],
                    role_mentions=tuple(
                        RoleMention(m["role"], m["char_start"], m["char_end"])
                        for m in rec.get("role_mentions", [])
                    ),
                )
            except KeyError as e:
                raise SchemaError(f"registry record missing field {e}") from e
            if t.event_type in templates:
                raise SchemaError(f"duplicate registry entry: {t.event_type}")
            templates[t.event_type] = t
        return cls(templates)

    @classmethod
    def from_file(cls, path: str | Path) -> "SchemaRegistry":
        with open(path) as f:
            records = json.load(f)
        if not isinstance(records, list):
            raise SchemaError(f"{path}: registry must be a JSON list of records")
        return cls.from_records(records)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_records(), f, indent=2)
            f.write("\n")


def _load_bundled(name: str) -> SchemaRegistry:
    with resources.files("argtab.data").joinpath(name).open() as f:
        return SchemaRegistry.from_records(json.load(f))


def mlee_registry() -> SchemaRegistry:
    """Prompts for the 23 biomedical event types of the MLEE benchmark."""
    return _load_bundled("mlee_prompts.json")


def synth_registry() -> SchemaRegistry:
    """Small toy ontology used by the synthetic corpus generator and tests."""
    return _load_bundled("synth_prompts.json")
