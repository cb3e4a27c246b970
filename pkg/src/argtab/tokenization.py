"""Tokenizers for the desk and paper profiles.

The desk profile uses a plain word-level vocabulary (one token per word), so
word and subword indices coincide and tests stay fast. The paper profile
wraps a pretrained subword tokenizer. Both expose the same small surface:
sentinel tokens, numbered trigger-marker pairs, per-word tokenization and
token-to-id lookup.
"""

from __future__ import annotations

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"


def marker_tokens(ordinal: int) -> tuple[str, str]:
    return f"<T-{ordinal}>", f"</T-{ordinal}>"


class WordTokenizer:
    """Word-level tokenizer with a fixed vocabulary and trigger markers."""

    def __init__(self, words, max_markers=16):
        self.max_markers = max_markers
        self._specials = [PAD, BOS, EOS, UNK]
        for i in range(1, max_markers + 1):
            self._specials.extend(marker_tokens(i))
        vocab = list(self._specials)
        seen = set(vocab)
        for w in words:
            if w not in seen:
                seen.add(w)
                vocab.append(w)
        self._vocab = vocab
        self._ids = {tok: i for i, tok in enumerate(vocab)}

    # -- shared tokenizer surface ------------------------------------------
    pad_token, bos_token, eos_token, unk_token = PAD, BOS, EOS, UNK

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def vocab_size(self) -> int:
        return len(self._vocab)

    def marker_pair(self, ordinal: int) -> tuple[str, str]:
        if not (1 <= ordinal <= self.max_markers):
            raise ValueError(
                f"trigger ordinal {ordinal} exceeds max_markers={self.max_markers}"
            )
        return marker_tokens(ordinal)

    def is_special(self, token: str) -> bool:
        return token in self._ids and self._ids[token] < len(self._specials)

    def tokenize_word(self, word: str, is_first: bool = False) -> list[str]:
        return [word]

    def token_id(self, token: str) -> int:
        return self._ids.get(token, self._ids[UNK])

    def ids(self, tokens) -> list[int]:
        return [self.token_id(t) for t in tokens]

    # -- persistence --------------------------------------------------------
    def to_config(self) -> dict:
        return {
            "kind": "word",
            "max_markers": self.max_markers,
            "words": self._vocab[len(self._specials):],
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "WordTokenizer":
        return cls(cfg["words"], max_markers=cfg["max_markers"])

    @classmethod
    def build(cls, instances, registry=None, max_markers=16) -> "WordTokenizer":
        """Collect the vocabulary from a corpus plus the registry's prompts."""
        words: list[str] = []
        for inst in instances:
            words.extend(inst.text)
        if registry is not None:
            for event_type in registry.event_types:
                tpl = registry.prompt(event_type)
                words.extend(tpl.words)
                words.extend(tpl.bare_role_variant().words)
        return cls(words, max_markers=max_markers)


class PretrainedTokenizer:
    """Adapter around a Hugging Face tokenizer for the paper profile.

    Trigger markers are registered as additional special tokens; the embedding
    matrix of the backbone must be resized to ``vocab_size`` after loading.
    """

    def __init__(self, name_or_path, max_markers=16):
        from transformers import AutoTokenizer

        self.max_markers = max_markers
        self._tok = AutoTokenizer.from_pretrained(name_or_path, use_fast=True)
        extra = [t for i in range(1, max_markers + 1) for t in marker_tokens(i)]
        self._tok.add_special_tokens({"additional_special_tokens": extra})
        self.pad_token = self._tok.pad_token
        self.bos_token = self._tok.bos_token or self._tok.cls_token
        self.eos_token = self._tok.eos_token or self._tok.sep_token

    @property
    def pad_id(self) -> int:
        return self._tok.pad_token_id

    @property
    def vocab_size(self) -> int:
        return len(self._tok)

    def marker_pair(self, ordinal: int) -> tuple[str, str]:
        if not (1 <= ordinal <= self.max_markers):
            raise ValueError(
                f"trigger ordinal {ordinal} exceeds max_markers={self.max_markers}"
            )
        return marker_tokens(ordinal)

    def is_special(self, token: str) -> bool:
        return token in self._tok.all_special_tokens

    def tokenize_word(self, word: str, is_first: bool = False) -> list[str]:
        text = word if is_first else " " + word
        pieces = self._tok.tokenize(text)
        return pieces if pieces else [self._tok.unk_token]

    def token_id(self, token: str) -> int:
        return self._tok.convert_tokens_to_ids(token)

    def ids(self, tokens) -> list[int]:
        return self._tok.convert_tokens_to_ids(list(tokens))
