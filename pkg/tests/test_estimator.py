import pytest
import torch
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from argtab.estimator import TableArgumentExtractor
from argtab.evaluation import EvalReport
from argtab.synth import synth_corpus


@pytest.fixture(scope="module")
def tiny_corpus():
    return synth_corpus(9, 12, max_events=2)


@pytest.fixture(scope="module")
def fitted(tiny_corpus):
    est = TableArgumentExtractor(steps=6, batch_size=2, seed=0,
                                 hidden_size=32, ffn_size=64)
    return est.fit(tiny_corpus)


def test_get_set_params_roundtrip():
    est = TableArgumentExtractor(scheme="multi-multi", steps=5)
    params = est.get_params()
    assert params["scheme"] == "multi-multi" and params["steps"] == 5
    est.set_params(steps=9)
    assert est.steps == 9


def test_sklearn_clone_keeps_params():
    est = TableArgumentExtractor(scheme="single-single", use_prompts=False)
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        TableArgumentExtractor().predict([])


def test_fit_predict_score(fitted, tiny_corpus):
    preds = fitted.predict(tiny_corpus)
    assert len(preds) == len(tiny_corpus)
    for instance, inst_preds in zip(tiny_corpus, preds):
        assert len(inst_preds) == instance.num_events
    s = fitted.score(tiny_corpus)
    assert 0.0 <= s <= 1.0


def test_evaluate_returns_report(fitted, tiny_corpus):
    report = fitted.evaluate(tiny_corpus, analyses=("event_count",))
    assert isinstance(report, EvalReport)
    assert "event_count" in report.buckets


def test_invalid_scheme_raises_at_fit(tiny_corpus):
    est = TableArgumentExtractor(scheme="single-multi", steps=1)
    with pytest.raises(ValueError, match="valid schemes"):
        est.fit(tiny_corpus)


def test_invalid_profile_raises(tiny_corpus):
    est = TableArgumentExtractor(profile="cloud", steps=1)
    with pytest.raises(ValueError, match="profile"):
        est.fit(tiny_corpus)


def test_non_instance_input_rejected(fitted):
    with pytest.raises(TypeError, match="EAEInstance"):
        fitted.predict(["text"])


def test_empty_corpus_rejected():
    with pytest.raises(ValueError, match="at least one"):
        TableArgumentExtractor(steps=1).fit([])


def test_ablation_params_reach_pipeline(tiny_corpus):
    est = TableArgumentExtractor(steps=1, batch_size=1, hidden_size=32,
                                 ffn_size=64, use_structure_mask=False,
                                 use_precomputed_encodings=False,
                                 use_prompts=False)
    est.fit(tiny_corpus)
    toggles = est.pipeline_.toggles
    assert not toggles.structure_mask
    assert not toggles.precomputed_encodings
    assert not toggles.prompts


def test_save_load_same_predictions(fitted, tiny_corpus, tmp_path):
    path = tmp_path / "extractor.pt"
    fitted.save(path)
    again = TableArgumentExtractor.load(path)
    assert again.scheme_.name == fitted.scheme_.name
    a = fitted.predict(tiny_corpus)
    b = again.predict(tiny_corpus)
    assert a == b


def test_fit_deterministic_under_seed(tiny_corpus):
    a = TableArgumentExtractor(steps=4, batch_size=2, seed=7, hidden_size=32,
                               ffn_size=64).fit(tiny_corpus)
    b = TableArgumentExtractor(steps=4, batch_size=2, seed=7, hidden_size=32,
                               ffn_size=64).fit(tiny_corpus)
    sa, sb = a.pipeline_.model.state_dict(), b.pipeline_.model.state_dict()
    assert all(torch.equal(sa[k], sb[k]) for k in sa)
    assert a.predict(tiny_corpus) == b.predict(tiny_corpus)
