"""Slotted-table construction.

The decoder input is a table: a column header that concatenates the prompts
of the event types present (each role mention heading one argument column),
followed by one row per event holding the trigger cell and one slot cell per
role column of that event's type.

Every table position carries a kind: ``header-role`` (part of a role
mention), ``header-other`` (other prompt tokens), ``trigger`` or ``slot``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .corpus import CorpusError, EventRecord, MarkedText
from .schema import SchemaRegistry

HEADER_ROLE = "header-role"
HEADER_OTHER = "header-other"
TRIGGER = "trigger"
SLOT = "slot"

PROV_HEADER = "header-encoding"
PROV_TRIGGER = "trigger-copy"
PROV_SLOT = "slot-average"


@dataclass(frozen=True)
class RoleColumn:
    role: str
    event_type: str
    token_span: tuple[int, int]


@dataclass
class ColumnHeader:
    tokens: list[str]
    token_ids: list[int]
    columns: list[RoleColumn]
    prompt_spans: list[tuple[str, tuple[int, int]]]

    def __len__(self) -> int:
        return len(self.tokens)

    def columns_for(self, event_type: str) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.event_type == event_type]


def build_column_header(event_types, registry: SchemaRegistry, tokenizer,
                        use_prompts=True) -> ColumnHeader:
    """Concatenate the prompts of the given types, in first-occurrence order.

    Duplicate types contribute a single prompt occurrence. With
    ``use_prompts=False`` each prompt is reduced to the bare concatenation of
    its role names (column count and order preserved).
    """
    distinct: list[str] = []
    for t in event_types:
        key = registry.prompt(t).event_type
        if key not in distinct:
            distinct.append(key)
    tokens: list[str] = []
    columns: list[RoleColumn] = []
    prompt_spans: list[tuple[str, tuple[int, int]]] = []
    for event_type in distinct:
        template = registry.prompt(event_type)
        if not use_prompts:
            template = template.bare_role_variant()
        start = len(tokens)
        word_offsets = []
        for i, word in enumerate(template.words):
            pieces = tokenizer.tokenize_word(word, is_first=(i == 0))
            word_offsets.append((len(tokens), len(tokens) + len(pieces)))
            tokens.extend(pieces)
        for mention, (ws, we) in zip(template.role_mentions, template.mention_word_spans):
            columns.append(RoleColumn(
                role=mention.role,
                event_type=event_type,
                token_span=(word_offsets[ws][0], word_offsets[we - 1][1]),
            ))
        prompt_spans.append((event_type, (start, len(tokens))))
    return ColumnHeader(tokens, tokenizer.ids(tokens), columns, prompt_spans)


@dataclass(frozen=True)
class SlotCell:
    role: str
    column: int
    event_row: int


@dataclass
class TableRow:
    event_index: int
    event_type: str
    ordinal: int
    trigger_source: tuple[int, int]
    trigger_positions: tuple[int, int]
    trigger_token_ids: list[int]
    slots: list[SlotCell]
    slot_positions: list[int]


@dataclass
class SlottedTable:
    header: ColumnHeader
    rows: list[TableRow]
    kinds: list[str] = field(init=False)
    owner_row: list[int] = field(init=False)
    owner_col: list[int] = field(init=False)

    def __post_init__(self):
        h = len(self.header)
        kinds = [HEADER_OTHER] * h
        col_of = [-1] * h
        for ci, col in enumerate(self.header.columns):
            for p in range(*col.token_span):
                kinds[p] = HEADER_ROLE
                col_of[p] = ci
        row_of = [-1] * h
        for ri, row in enumerate(self.rows):
            ts, te = row.trigger_positions
            kinds.extend([TRIGGER] * (te - ts))
            row_of.extend([ri] * (te - ts))
            col_of.extend([-1] * (te - ts))
            for slot in row.slots:
                kinds.append(SLOT)
                row_of.append(ri)
                col_of.append(slot.column)
        self.kinds = kinds
        self.owner_row = row_of
        self.owner_col = col_of

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def slot_cells(self) -> list[SlotCell]:
        return [s for row in self.rows for s in row.slots]

    @property
    def slot_positions(self) -> list[int]:
        return [p for row in self.rows for p in row.slot_positions]

    def positions_of_column(self, column: int) -> list[int]:
        return list(range(*self.header.columns[column].token_span))


def build_table(marked: MarkedText, events, registry: SchemaRegistry, tokenizer,
                header: ColumnHeader | None = None, use_prompts=True,
                max_len=None) -> SlottedTable:
    """Build the slotted table for the given marked text and events.

    ``events`` is a list of ``(event_index, EventRecord)`` pairs; rows appear
    in trigger order (marker-ordinal order, input order among events sharing
    a trigger). Every event's trigger must be marked in ``marked``.
    """
    ordered = sorted(
        enumerate(events),
        key=lambda item: (_ordinal_of(marked, item[1][1]), item[0]),
    )
    ordered_events = [pair for _, pair in ordered]
    if header is None:
        header = build_column_header(
            [ev.event_type for _, ev in ordered_events], registry, tokenizer,
            use_prompts=use_prompts,
        )
    rows = []
    pos = len(header)
    for row_idx, (event_index, ev) in enumerate(ordered_events):
        template = registry.prompt(ev.event_type)
        columns = header.columns_for(template.event_type)
        if len(columns) != len(template.role_mentions):
            raise CorpusError(
                f"header does not carry the columns of {ev.event_type!r}"
            )
        ordinal = _ordinal_of(marked, ev)
        src = marked.trigger_subword_span(ordinal)
        width = src[1] - src[0]
        trigger_positions = (pos, pos + width)
        pos += width
        slots = [SlotCell(header.columns[c].role, c, row_idx) for c in columns]
        slot_positions = list(range(pos, pos + len(slots)))
        pos += len(slots)
        rows.append(TableRow(
            event_index=event_index,
            event_type=template.event_type,
            ordinal=ordinal,
            trigger_source=src,
            trigger_positions=trigger_positions,
            trigger_token_ids=[marked.token_ids[p] for p in range(*src)],
            slots=slots,
            slot_positions=slot_positions,
        ))
    table = SlottedTable(header, rows)
    if max_len is not None and len(table) > max_len:
        raise CorpusError(
            f"table length {len(table)} exceeds the decoder limit {max_len}"
        )
    return table


def _ordinal_of(marked: MarkedText, ev: EventRecord) -> int:
    if ev.trigger not in marked.trigger_ordinals:
        raise CorpusError(f"event trigger {ev.trigger} is not marked")
    return marked.trigger_ordinals[ev.trigger]


@dataclass
class TableEmbedding:
    matrix: torch.Tensor
    provenance: list[str]


def init_table_embeddings(table: SlottedTable, prompt_encodings: dict,
                          text_encoding: torch.Tensor,
                          marked: MarkedText) -> TableEmbedding:
    """Assemble the initial table representation.

    Header positions take the per-prompt encodings, concatenated; trigger
    cells copy the marked-text encoding at the trigger subwords; each slot is
    the mean of (a) the mean encoding of its role mention's tokens and (b) the
    mean encoding of its trigger's two marker tokens.

    ``prompt_encodings`` maps event type to a ``[prompt length x d]`` matrix
    aligned with the header's tokens for that prompt; ``text_encoding`` is
    ``[len(marked) x d]``. Either may come from the encoder (the default) or
    from raw token embeddings (the table-initialization ablation).
    """
    d = text_encoding.shape[1]
    header_parts = []
    for event_type, (s, e) in table.header.prompt_spans:
        enc = prompt_encodings[event_type]
        if enc.shape[0] != e - s:
            raise ValueError(
                f"prompt encoding for {event_type!r} has {enc.shape[0]} rows, "
                f"header expects {e - s}"
            )
        if enc.shape[1] != d:
            raise ValueError(
                f"width mismatch: prompt encoding {enc.shape[1]} vs text {d}"
            )
        header_parts.append(enc)
    header_enc = (torch.cat(header_parts, dim=0) if header_parts
                  else text_encoding.new_zeros((0, d)))

    pieces = [header_enc]
    provenance = [PROV_HEADER] * len(table.header)
    for row in table.rows:
        src_s, src_e = row.trigger_source
        pieces.append(text_encoding[src_s:src_e])
        provenance.extend([PROV_TRIGGER] * (src_e - src_s))
        open_pos, close_pos = marked.marker_positions[row.ordinal]
        marker_mean = text_encoding[[open_pos, close_pos]].mean(dim=0)
        for slot in row.slots:
            cs, ce = table.header.columns[slot.column].token_span
            role_mean = header_enc[cs:ce].mean(dim=0)
            pieces.append(((role_mean + marker_mean) / 2).unsqueeze(0))
            provenance.append(PROV_SLOT)
    matrix = torch.cat(pieces, dim=0)
    if matrix.shape[0] != len(table):
        raise ValueError("assembled table embedding does not cover the layout")
    return TableEmbedding(matrix=matrix, provenance=provenance)
