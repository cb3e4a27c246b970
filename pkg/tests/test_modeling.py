import numpy as np
import pytest
import torch

from argtab.masking import StructureMask, all_true_mask
from argtab.modeling import (ModelConfig, TextTableModel, additive_mask,
                             load_checkpoint, load_masked_lm_state, save_checkpoint)
from argtab.schema import synth_registry
from argtab.tokenization import WordTokenizer


def small_model(seed=0, **overrides) -> TextTableModel:
    torch.manual_seed(seed)
    cfg = ModelConfig.desk(vocab_size=64, **overrides)
    model = TextTableModel(cfg)
    model.eval()
    return model


IDS = [1, 40, 41, 42, 43, 44, 2]


def test_encode_shape_contract():
    model = small_model()
    out = model.encode(IDS)
    assert out.shape == (len(IDS), model.config.hidden_size)


def test_encode_rejects_out_of_vocab():
    model = small_model()
    with pytest.raises(ValueError, match="vocabulary"):
        model.encode([1, 999, 2])


def test_encode_rejects_overlength():
    model = small_model(max_positions=8)
    with pytest.raises(ValueError, match="position"):
        model.encode(list(range(1, 12)))


def test_permuting_tokens_changes_output():
    model = small_model()
    base = model.encode(IDS)
    swapped = list(IDS)
    swapped[1], swapped[4] = swapped[4], swapped[1]
    other = model.encode(swapped)
    assert not torch.allclose(base, other)


def test_zero_layer_stack_is_embedding_lookup():
    model = small_model(encoder_layers=0)
    ids = torch.tensor(IDS)
    assert torch.equal(model.encode(IDS), model.embeddings(ids))


def test_eval_mode_deterministic():
    model = small_model()
    a = model.encode(IDS)
    b = model.encode(IDS)
    assert torch.equal(a, b)
    e = model.encode(IDS)
    assert torch.equal(model.contextualize(e), model.contextualize(e))


def test_contextualize_preserves_shape_and_skips_cross_attention():
    model = small_model()
    encoding = model.encode(IDS)
    base = model.contextualize(encoding)
    assert base.shape == encoding.shape
    # perturb every cross-attention weight; the result must not move at all
    with torch.no_grad():
        for p in model.cross_attention_parameters():
            p.add_(torch.randn_like(p))
    assert torch.equal(model.contextualize(encoding), base)


def test_decode_table_mask_size_checked():
    model = small_model()
    memory = model.encode(IDS)
    table = torch.randn(5, model.config.hidden_size)
    with pytest.raises(ValueError, match="mask"):
        model.decode_table(table, all_true_mask(7), memory)


def _zero_cross_attention(model):
    with torch.no_grad():
        for block in model.decoder:
            block.cross.out.weight.zero_()
            block.cross.out.bias.zero_()


def _fd_change(model, table, mask, memory, k, eps=1e-3):
    """Max output change per unit perturbation of table row k."""
    direction = torch.randn(table.shape[1])
    plus, minus = table.clone(), table.clone()
    plus[k] += eps * direction
    minus[k] -= eps * direction
    with torch.no_grad():
        hp = model.decode_table(plus, mask, memory)
        hm = model.decode_table(minus, mask, memory)
    return (hp - hm).abs() / (2 * eps)


def test_identity_mask_isolates_positions():
    model = small_model(decoder_layers=1)
    _zero_cross_attention(model)
    memory = model.encode(IDS)
    n = 5
    table = torch.randn(n, model.config.hidden_size)
    mask = StructureMask(np.eye(n, dtype=bool))
    torch.manual_seed(3)
    for k in range(n):
        delta = _fd_change(model, table, mask, memory, k)
        for q in range(n):
            if q != k:
                assert float(delta[q].max()) < 1e-7
        assert float(delta[k].max()) > 1e-4  # the position itself does move


def test_cross_attention_reaches_all_text():
    model = small_model(decoder_layers=1)
    memory = model.encode(IDS)
    table = torch.randn(4, model.config.hidden_size)
    mask = all_true_mask(4)
    with torch.no_grad():
        base = model.decode_table(table, mask, memory)
        perturbed = memory.clone()
        perturbed[3] += 0.5
        other = model.decode_table(table, mask, perturbed)
    assert not torch.allclose(base, other)


def test_additive_mask_values():
    allowed = np.array([[True, False], [True, True]])
    m = additive_mask(allowed)
    assert m[0, 0] == 0 and m[1, 0] == 0 and m[1, 1] == 0
    assert torch.isinf(m[0, 1]) and m[0, 1] < 0


def test_cross_attention_parameters_cover_cross_blocks_only():
    model = small_model()
    cross = {id(p) for p in model.cross_attention_parameters()}
    named = dict(model.named_parameters())
    for name, p in named.items():
        is_cross = ".cross." in name or ".cross_norm." in name
        assert (id(p) in cross) == is_cross
    # 4 linears (w+b) + layer norm (w+b) per decoder block
    assert len(cross) == model.config.decoder_layers * 10


def test_checkpoint_roundtrip(tmp_path):
    registry = synth_registry()
    tokenizer = WordTokenizer(["alpha", "bravo"])
    torch.manual_seed(0)
    model = TextTableModel(ModelConfig.desk(vocab_size=tokenizer.vocab_size))
    model.eval()
    path = tmp_path / "model.pt"
    save_checkpoint(path, model, tokenizer, registry, extra={"note": 1})
    again, tok2, reg2, extra = load_checkpoint(path)
    ids = tokenizer.ids(["<s>", "alpha", "bravo", "</s>"])
    assert torch.equal(model.encode(ids), again.encode(ids))
    assert tok2.vocab_size == tokenizer.vocab_size
    assert reg2.content_hash() == registry.content_hash()
    assert extra == {"note": 1}


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    registry = synth_registry()
    tokenizer = WordTokenizer(["alpha"])
    model = TextTableModel(ModelConfig.desk(vocab_size=tokenizer.vocab_size))
    path = tmp_path / "model.pt"
    save_checkpoint(path, model, tokenizer, registry)
    payload = torch.load(path, weights_only=False)
    payload["shape_manifest"]["span_head.w_start"] = [7]
    torch.save(payload, path)
    with pytest.raises(ValueError, match="shape mismatch"):
        load_checkpoint(path)


# ---------------------------------------------------------------------------
# pretrained backbone transplant
# ---------------------------------------------------------------------------

def test_masked_lm_transplant_matches_reference():
    transformers = pytest.importorskip("transformers")
    from transformers import RobertaConfig, RobertaModel

    hf_cfg = RobertaConfig(
        vocab_size=60, hidden_size=32, num_hidden_layers=4,
        num_attention_heads=4, intermediate_size=64, max_position_embeddings=40,
        pad_token_id=1, type_vocab_size=1,
        hidden_dropout_prob=0.0, attention_probs_dropout_prob=0.0,
        attn_implementation="eager")
    torch.manual_seed(7)
    reference = RobertaModel(hf_cfg, add_pooling_layer=False)
    reference.eval()

    cfg = ModelConfig(vocab_size=60, hidden_size=32, num_heads=4,
                      encoder_layers=3, decoder_layers=1, ffn_size=64,
                      max_positions=40, dropout=0.0, pad_token_id=1,
                      layer_norm_eps=hf_cfg.layer_norm_eps)
    model = TextTableModel(cfg)
    model.eval()
    load_masked_lm_state(model, dict(reference.state_dict()))

    ids = [0, 11, 12, 13, 14, 15, 2]
    with torch.no_grad():
        want = reference(input_ids=torch.tensor([ids])).last_hidden_state[0]
        # encoder(3 layers) then decoder self+ffn(1 layer, cross skipped)
        got = model.contextualize(model.encode(ids))
    assert torch.allclose(got, want, atol=1e-5)


def test_transplant_keeps_new_vocab_rows():
    transformers = pytest.importorskip("transformers")
    from transformers import RobertaConfig, RobertaModel

    hf_cfg = RobertaConfig(vocab_size=50, hidden_size=32, num_hidden_layers=2,
                           num_attention_heads=4, intermediate_size=64,
                           max_position_embeddings=40, pad_token_id=1,
                           type_vocab_size=1)
    reference = RobertaModel(hf_cfg, add_pooling_layer=False)
    cfg = ModelConfig(vocab_size=58, hidden_size=32, num_heads=4,
                      encoder_layers=1, decoder_layers=1, ffn_size=64,
                      max_positions=40, dropout=0.0, pad_token_id=1)
    torch.manual_seed(0)
    model = TextTableModel(cfg)
    before = model.embeddings.word_embeddings.weight[50:].clone()
    load_masked_lm_state(model, dict(reference.state_dict()))
    after = model.embeddings.word_embeddings.weight
    assert torch.equal(after[:50], reference.state_dict()["embeddings.word_embeddings.weight"])
    assert torch.equal(after[50:], before)


def test_transplant_rejects_missing_layers():
    transformers = pytest.importorskip("transformers")
    from transformers import RobertaConfig, RobertaModel

    hf_cfg = RobertaConfig(vocab_size=50, hidden_size=32, num_hidden_layers=2,
                           num_attention_heads=4, intermediate_size=64,
                           max_position_embeddings=40, pad_token_id=1,
                           type_vocab_size=1)
    reference = RobertaModel(hf_cfg, add_pooling_layer=False)
    cfg = ModelConfig(vocab_size=50, hidden_size=32, num_heads=4,
                      encoder_layers=2, decoder_layers=2, ffn_size=64,
                      max_positions=40, pad_token_id=1)
    with pytest.raises(ValueError, match="fewer than 4 layers"):
        load_masked_lm_state(TextTableModel(cfg), dict(reference.state_dict()))


def test_paper_config_defaults():
    cfg = ModelConfig.paper(vocab_size=50265)
    assert (cfg.encoder_layers, cfg.decoder_layers) == (17, 7)
    assert cfg.hidden_size == 1024 and cfg.num_heads == 16
