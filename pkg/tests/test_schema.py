import json

import pytest

from argtab.schema import (PromptTemplate, RoleMention, SchemaError, SchemaRegistry,
                           canonical_type, mlee_registry, synth_registry)


def test_canonical_type_normalizes_separators():
    assert canonical_type("Gene expression") == "Gene_expression"
    assert canonical_type("Gene-expression") == "Gene_expression"


def test_mlee_registry_has_23_types():
    assert len(mlee_registry()) == 23


def test_mlee_gene_expression_prompt():
    tpl = mlee_registry().prompt("Gene-expression")
    assert tpl.text == "expression of Gene and Gene ( and Gene )"
    assert [m.role for m in tpl.role_mentions] == ["Gene", "Gene", "Gene"]
    assert tpl.role_capacity("Gene") == 3
    assert tpl.role_set == {"Gene"}


def test_mlee_mentions_match_prompt_slices():
    reg = mlee_registry()
    for event_type in reg.event_types:
        tpl = reg.prompt(event_type)
        for m in tpl.role_mentions:
            assert tpl.text[m.char_start:m.char_end] == m.role


def test_unknown_type_raises_naming_it():
    with pytest.raises(SchemaError, match="no-such-type"):
        synth_registry().prompt("no-such-type")


def test_mention_word_spans_cover_roles():
    tpl = mlee_registry().prompt("Localization")
    spans = tpl.mention_word_spans
    words = tpl.words
    assert [" ".join(words[s:e]) for s, e in spans] == \
        ["Entity", "At Location", "To Location", "From Location"]


def test_misaligned_mention_rejected():
    with pytest.raises(SchemaError, match="word boundaries"):
        PromptTemplate("x", "something grows", (RoleMention("some", 0, 4),))


def test_overlapping_mentions_rejected():
    with pytest.raises(SchemaError, match="overlap"):
        PromptTemplate("x", "Gene product", (RoleMention("Gene product", 0, 12),
                                             RoleMention("product", 5, 12)))


def test_bare_role_variant_keeps_columns():
    tpl = mlee_registry().prompt("Regulation")
    bare = tpl.bare_role_variant()
    assert bare.text == "Something Event/Entity Site"
    assert [m.role for m in bare.role_mentions] == [m.role for m in tpl.role_mentions]


def test_registry_roundtrip(tmp_path):
    reg = synth_registry()
    path = tmp_path / "registry.json"
    reg.save(path)
    again = SchemaRegistry.from_file(path)
    assert again.to_records() == reg.to_records()
    assert again.content_hash() == reg.content_hash()


def test_registry_rejects_duplicates(tmp_path):
    recs = synth_registry().to_records()
    path = tmp_path / "dup.json"
    with open(path, "w") as f:
        json.dump(recs + [recs[0]], f)
    with pytest.raises(SchemaError, match="duplicate"):
        SchemaRegistry.from_file(path)


def test_roleless_prompt_allowed():
    tpl = synth_registry().prompt("growth")
    assert tpl.role_mentions == ()
    assert tpl.role_set == frozenset()
