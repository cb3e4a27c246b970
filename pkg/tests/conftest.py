import pytest
import torch

# tiny matmuls run fastest single-threaded; keeps the suite deterministic too
torch.set_num_threads(1)

from argtab.modeling import ModelConfig, TextTableModel
from argtab.schema import SchemaRegistry, synth_registry
from argtab.schemes import Pipeline, Toggles
from argtab.synth import synth_corpus
from argtab.tokenization import WordTokenizer


def record(event_type, prompt, roles):
    """Registry record with mention spans located by scanning left to right."""
    mentions, pos = [], 0
    for role in roles:
        i = prompt.index(role, pos)
        mentions.append({"role": role, "char_start": i, "char_end": i + len(role)})
        pos = i + len(role)
    return {"type": event_type, "prompt": prompt, "role_mentions": mentions}


def make_pipeline(corpus, registry=None, seed=0, toggles=None, **config_overrides):
    """Small randomly initialized desk pipeline over the given corpus."""
    registry = registry or synth_registry()
    torch.manual_seed(seed)
    tokenizer = WordTokenizer.build(corpus, registry)
    model = TextTableModel(ModelConfig.desk(vocab_size=tokenizer.vocab_size,
                                            **config_overrides))
    model.eval()
    return Pipeline(model, tokenizer, registry, toggles=toggles or Toggles())


@pytest.fixture(scope="session")
def registry():
    return synth_registry()


@pytest.fixture(scope="session")
def corpus50():
    return synth_corpus(0, 50, max_events=3)


@pytest.fixture()
def pipeline(corpus50):
    return make_pipeline(corpus50)


@pytest.fixture(scope="session")
def die_injure():
    return SchemaRegistry.from_records([
        record("die", "Victim ( and Victim ) died at Place killed by Killer",
               ["Victim", "Victim", "Place", "Killer"]),
        record("injure", "Victim injured by Injurer", ["Victim", "Injurer"]),
    ])
