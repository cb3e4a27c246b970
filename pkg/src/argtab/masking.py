"""Structure-aware self-attention mask over table positions.

``allowed[q][k]`` says whether query position q may attend key position k.
The mask is the union of four grants:

  R1  header tokens attend each other;
  R2  header tokens attend every trigger token;
  R3  a role column's tokens and the slots of that column attend each other;
  R4  a row's trigger tokens and that row's slots attend each other.

Everything else is disallowed. In particular, two distinct slot cells never
attend each other: R3/R4 grants are anchored on the role tokens and the
trigger tokens, so a slot reaches only itself, its role mention and its
trigger. R2 is directed (triggers do not attend the header) by default,
since only R3/R4 are phrased mutually; set ``symmetric_header_trigger`` to
grant the reverse direction as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .table import HEADER_OTHER, HEADER_ROLE, SLOT, TRIGGER, SlottedTable

_KINDS = {HEADER_ROLE, HEADER_OTHER, TRIGGER, SLOT}


@dataclass
class StructureMask:
    allowed: np.ndarray

    def __len__(self) -> int:
        return self.allowed.shape[0]

    def to_bytes(self) -> bytes:
        """Bit-pack the matrix row-major, for debugging dumps."""
        return np.packbits(self.allowed, axis=None).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, size: int) -> "StructureMask":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=size * size)
        return cls(bits.reshape(size, size).astype(bool))


def all_true_mask(size: int) -> StructureMask:
    return StructureMask(np.ones((size, size), dtype=bool))


def build_structure_mask(table: SlottedTable,
                         symmetric_header_trigger=False) -> StructureMask:
    n = len(table)
    for p, kind in enumerate(table.kinds):
        if kind not in _KINDS:
            raise ValueError(f"table position {p} has unknown kind {kind!r}")
    allowed = np.zeros((n, n), dtype=bool)

    header = [p for p, k in enumerate(table.kinds) if k in (HEADER_ROLE, HEADER_OTHER)]
    triggers = [p for p, k in enumerate(table.kinds) if k == TRIGGER]

    if header:
        allowed[np.ix_(header, header)] = True
    if header and triggers:
        allowed[np.ix_(header, triggers)] = True
        if symmetric_header_trigger:
            allowed[np.ix_(triggers, header)] = True

    slots_of_column: dict[int, list[int]] = {}
    for p, (kind, col) in enumerate(zip(table.kinds, table.owner_col)):
        if kind == SLOT:
            slots_of_column.setdefault(col, []).append(p)
    for col, slot_pos in slots_of_column.items():
        group = table.positions_of_column(col) + slot_pos
        allowed[np.ix_(group, group)] = True

    for row in table.rows:
        group = list(range(*row.trigger_positions)) + row.slot_positions
        allowed[np.ix_(group, group)] = True

    # grants are anchored: distinct slot cells never inter-attend
    all_slots = [p for p, k in enumerate(table.kinds) if k == SLOT]
    if all_slots:
        block = allowed[np.ix_(all_slots, all_slots)]
        allowed[np.ix_(all_slots, all_slots)] = np.diag(np.diag(block))

    return StructureMask(allowed)
