import numpy as np
import pytest

from argtab.corpus import EAEInstance, EventRecord, mark_triggers
from argtab.masking import StructureMask, all_true_mask, build_structure_mask
from argtab.schema import SchemaRegistry
from argtab.synth import synth_corpus
from argtab.table import (HEADER_OTHER, HEADER_ROLE, SLOT, TRIGGER, SlottedTable,
                          build_table)
from argtab.tokenization import WordTokenizer

from conftest import record


def rule_oracle(table, symmetric_header_trigger=False):
    """Literal per-pair re-evaluation of the four attention grants."""
    n = len(table)
    kinds = table.kinds

    def is_header(p):
        return kinds[p] in (HEADER_ROLE, HEADER_OTHER)

    column_groups = []
    for c in range(len(table.header.columns)):
        members = set(table.positions_of_column(c))
        members |= {p for p in range(n)
                    if kinds[p] == SLOT and table.owner_col[p] == c}
        column_groups.append(members)
    row_groups = []
    for row in table.rows:
        row_groups.append(set(range(*row.trigger_positions)) | set(row.slot_positions))

    def allowed(q, k):
        if is_header(q) and is_header(k):
            return True  # header tokens attend each other
        if is_header(q) and kinds[k] == TRIGGER:
            return True  # header tokens attend the triggers
        if symmetric_header_trigger and kinds[q] == TRIGGER and is_header(k):
            return True
        if kinds[q] == SLOT and kinds[k] == SLOT and q != k:
            return False  # no rule grants distinct slot cells to each other
        for group in column_groups:
            if q in group and k in group:
                return True  # a role and its slots attend each other
        for group in row_groups:
            if q in group and k in group:
                return True  # a trigger and its row's slots attend each other
        return False

    return np.array([[allowed(q, k) for k in range(n)] for q in range(n)])


def table_for(instance, registry, tokenizer, selected=None):
    selected = selected if selected is not None else list(range(instance.num_events))
    marked = mark_triggers(instance, selected, 250, tokenizer)
    events = [(i, instance.events[i]) for i in selected]
    return build_table(marked, events, registry, tokenizer)


@pytest.fixture(scope="module")
def single_event_setup():
    registry = SchemaRegistry.from_records(
        [record("hurtle", "someone fell over", ["someone"])])
    tokenizer = WordTokenizer(["someone", "fell", "over", "alpha", "bravo"])
    instance = EAEInstance("d0", ("alpha", "fell", "bravo"),
                           (EventRecord((1, 2), "hurtle", ()),))
    return table_for(instance, registry, tokenizer)


def test_single_event_single_role_blocks(single_event_setup):
    table = single_event_setup
    mask = build_structure_mask(table).allowed
    h = len(table.header)
    header = range(h)
    (trig,) = [p for p, k in enumerate(table.kinds) if k == TRIGGER]
    (slot,) = [p for p, k in enumerate(table.kinds) if k == SLOT]
    role = table.positions_of_column(0)

    assert mask[np.ix_(header, header)].all()          # header block
    assert all(mask[q][trig] for q in header)          # header -> trigger
    assert all(mask[slot][k] and mask[k][slot] for k in role)  # slot <-> its role
    assert mask[slot][trig] and mask[trig][slot]       # slot <-> trigger
    non_role_header = [p for p in header if p not in role]
    assert not any(mask[trig][k] for k in non_role_header)  # trigger !-> header


def test_mask_diagonal_always_true(single_event_setup):
    mask = build_structure_mask(single_event_setup).allowed
    assert np.diag(mask).all()


def test_header_only_table_is_all_true_block(die_injure):
    tokenizer = WordTokenizer("Victim ( and ) died at Place killed by Killer "
                              "injured Injurer".split())
    from argtab.table import build_column_header
    header = build_column_header(["die"], die_injure, tokenizer)
    table = SlottedTable(header, [])
    mask = build_structure_mask(table).allowed
    assert mask.all() and mask.shape == (len(header), len(header))


def test_slots_of_disjoint_events_do_not_attend(die_injure):
    tok = WordTokenizer("Victim ( and ) died at Place killed by Killer injured "
                        "Injurer alpha fell bravo hurt".split())
    instance = EAEInstance("d0", ("alpha", "fell", "bravo", "hurt"), (
        EventRecord((1, 2), "die", ()),
        EventRecord((3, 4), "injure", ()),
    ))
    table = table_for(instance, die_injure, tok)
    mask = build_structure_mask(table).allowed
    slots0 = table.rows[0].slot_positions
    slots1 = table.rows[1].slot_positions
    assert not mask[np.ix_(slots0, slots1)].any()
    assert not mask[np.ix_(slots1, slots0)].any()
    # and neither row's slots reach the other row's trigger
    t0 = list(range(*table.rows[0].trigger_positions))
    assert not mask[np.ix_(slots1, t0)].any()


def test_same_row_slots_do_not_interattend(die_injure):
    tok = WordTokenizer("Victim ( and ) died at Place killed by Killer injured "
                        "Injurer alpha fell bravo".split())
    instance = EAEInstance("d0", ("alpha", "fell", "bravo"),
                           (EventRecord((1, 2), "die", ()),))
    table = table_for(instance, die_injure, tok)
    mask = build_structure_mask(table).allowed
    slots = table.rows[0].slot_positions
    trig = range(*table.rows[0].trigger_positions)
    for a in slots:
        for b in slots:
            assert mask[a][b] == (a == b)
        assert all(mask[a][t] and mask[t][a] for t in trig)


def test_oracle_equivalence_on_random_tables():
    corpus = synth_corpus(123, 40, max_events=4)
    tokenizer = WordTokenizer.build(corpus)
    from argtab.schema import synth_registry
    registry = synth_registry()
    for instance in corpus:
        table = table_for(instance, registry, tokenizer)
        got = build_structure_mask(table).allowed
        want = rule_oracle(table)
        assert (got == want).all()


def test_symmetric_header_trigger_flag(single_event_setup):
    table = single_event_setup
    sym = build_structure_mask(table, symmetric_header_trigger=True).allowed
    want = rule_oracle(table, symmetric_header_trigger=True)
    assert (sym == want).all()
    (trig,) = [p for p, k in enumerate(table.kinds) if k == TRIGGER]
    role = set(table.positions_of_column(0))
    other_header = [p for p in range(len(table.header)) if p not in role]
    assert all(sym[trig][k] for k in other_header)


def test_r3_r4_blocks_symmetric(die_injure):
    tok = WordTokenizer("Victim ( and ) died at Place killed by Killer injured "
                        "Injurer alpha fell bravo hurt".split())
    instance = EAEInstance("d0", ("alpha", "fell", "bravo", "hurt"), (
        EventRecord((1, 2), "die", ()),
        EventRecord((3, 4), "injure", ()),
    ))
    table = table_for(instance, die_injure, tok)
    mask = build_structure_mask(table).allowed
    h = len(table.header)
    non_header = mask[h:, h:]
    assert (non_header == non_header.T).all()


def test_all_true_mask():
    assert all_true_mask(5).allowed.all()


def test_bitpack_roundtrip(single_event_setup):
    mask = build_structure_mask(single_event_setup)
    packed = mask.to_bytes()
    again = StructureMask.from_bytes(packed, len(mask))
    assert (again.allowed == mask.allowed).all()
