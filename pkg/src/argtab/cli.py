"""Command-line entry points: synthesize data, train, evaluate.

Settings resolve in three layers: built-in profile defaults, then the
``--config`` JSON file, then explicit flags (flags win). Every run writes a
manifest with the resolved configuration before any training starts.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import json
import statistics
from pathlib import Path

import click

from .corpus import CORPUS_FORMATS, CorpusError, load_corpus, save_corpus
from .estimator import TableArgumentExtractor, _resolve_registry
from .evaluation import ANALYSES, evaluate, write_plots
from .schema import SchemaError
from .schemes import VALID_SCHEMES, SchemeConfig, Toggles, predict_corpus
from .synth import synth_corpus

_ANALYSIS_ALIASES = {"buckets": "event_count", "event_count": "event_count",
                     "overlap": "overlap", "distance": "distance"}


@click.group()
def main():
    """Event argument extraction with slotted tables."""


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


@main.command("synth")
@click.option("--seed", default=0, show_default=True)
@click.option("--n", "n_instances", default=50, show_default=True)
@click.option("--max-events", default=3, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cmd_synth(seed, n_instances, max_events, out):
    """Generate a synthetic corpus in the native JSONL format."""
    try:
        corpus = synth_corpus(seed, n_instances, max_events=max_events)
    except (CorpusError, ValueError) as e:
        raise _fail(str(e))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    click.echo(f"wrote {len(corpus)} instances to {out}")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise _fail(f"{path}: config must be a JSON object")
    return cfg


def _resolve(flag, config, key, default):
    if flag is not None:
        return flag
    return config.get(key, default)


@main.command("train")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dev", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "data_format", type=click.Choice(CORPUS_FORMATS),
              default="native-jsonl", show_default=True)
@click.option("--registry", default=None,
              help="Prompt registry: a JSON file, or 'synth' / 'mlee' for the bundled ones.")
@click.option("--scheme", type=click.Choice(VALID_SCHEMES), default=None,
              help="Training-inference scheme.  [default: multi-single]")
@click.option("--profile", type=click.Choice(["desk", "paper"]), default=None,
              help="Model profile.  [default: desk]")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file with defaults for these options; flags win.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="Single training seed.  [default: 42]")
@click.option("--seeds", default=None,
              help="Comma-separated seed list for a multi-seed run, e.g. '0,1,2,3,4'.")
@click.option("--steps", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--window", type=int, default=None, help="Context window in words.")
@click.option("--eval-interval", type=int, default=None)
@click.option("--no-saam", is_flag=True, default=False,
              help="Disable the structure-aware attention mask (table self-attention becomes full).")
@click.option("--no-pet", is_flag=True, default=False,
              help="Initialize the table from token embeddings instead of encoder outputs.")
@click.option("--no-prompts", is_flag=True, default=False,
              help="Build the column header from bare role names instead of prompts.")
@click.option("--pretrained", default=None, help="Backbone name for the paper profile.")
def cmd_train(data, dev, data_format, registry, scheme, profile, config_path, out,
              seed, seeds, steps, learning_rate, batch_size, window, eval_interval,
              no_saam, no_pet, no_prompts, pretrained):
    """Train a model and write checkpoints, metrics and a run manifest."""
    config = _load_config(config_path)
    scheme = _resolve(scheme, config, "scheme", "multi-single")
    profile = _resolve(profile, config, "profile", "desk")
    registry_arg = _resolve(registry, config, "registry", "synth")
    window = _resolve(window, config, "context_window", 250)
    pretrained = _resolve(pretrained, config, "pretrained", "roberta-large")
    if scheme not in VALID_SCHEMES:
        raise click.UsageError(
            f"invalid scheme {scheme!r}; valid schemes: {', '.join(VALID_SCHEMES)}")

    if seeds is not None:
        try:
            seed_list = [int(s) for s in seeds.split(",") if s.strip() != ""]
        except ValueError:
            raise click.UsageError(f"--seeds must be a comma-separated integer list, got {seeds!r}")
    else:
        seed_list = [seed if seed is not None else config.get("seed", 42)]
    if not seed_list:
        raise click.UsageError("--seeds is empty")

    try:
        registry_obj = _resolve_registry(registry_arg)
        corpus = load_corpus(data, data_format, registry=registry_obj)
        dev_corpus = load_corpus(dev, data_format, registry=registry_obj) if dev else None
    except (CorpusError, SchemaError, OSError) as e:
        raise _fail(str(e))
    if not corpus:
        raise _fail(f"{data}: corpus is empty")

    toggles = Toggles.from_flags(no_saam=no_saam, no_pet=no_pet, no_prompts=no_prompts)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def make_estimator(run_seed):
        return TableArgumentExtractor(
            scheme=scheme, profile=profile, registry=registry_obj,
            steps=_resolve(steps, config, "steps", None),
            learning_rate=_resolve(learning_rate, config, "learning_rate", None),
            batch_size=_resolve(batch_size, config, "batch_size", None),
            eval_interval=_resolve(eval_interval, config, "eval_interval", None),
            warmup_ratio=config.get("warmup_ratio"),
            max_grad_norm=config.get("max_grad_norm"),
            max_span_len=config.get("max_span_len", 10),
            max_encoder_len=config.get("max_encoder_len"),
            max_decoder_len=config.get("max_decoder_len"),
            seed=run_seed, context_window=window,
            use_structure_mask=toggles.structure_mask,
            use_precomputed_encodings=toggles.precomputed_encodings,
            use_prompts=toggles.prompts,
            pretrained_name=pretrained,
        )

    manifest = {
        "command": "train",
        "data": str(data),
        "dev": str(dev) if dev else None,
        "format": data_format,
        "scheme": scheme,
        "profile": profile,
        "seeds": seed_list,
        "toggles": toggles.to_dict(),
        "registry_sha256": registry_obj.content_hash(),
        "train_config": make_estimator(seed_list[0])._train_config().to_dict(),
        "outputs": {
            "checkpoints": [f"seed_{s}/model.pt" for s in seed_list],
            "metrics": [f"seed_{s}/metrics.jsonl" for s in seed_list],
            "aggregate": "aggregate.json" if len(seed_list) > 1 else None,
        },
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)

    finals = []
    for run_seed in seed_list:
        run_dir = out_dir / f"seed_{run_seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        est = make_estimator(run_seed)
        est.fit(corpus, dev=dev_corpus)
        est.save(run_dir / "model.pt")
        with open(run_dir / "metrics.jsonl", "w") as f:
            for record in est.history_:
                f.write(json.dumps(record) + "\n")
        final = {"seed": run_seed}
        if est.history_:
            final["final_loss"] = est.history_[-1]["loss"]
        dev_scores = [r["dev_arg_c"] for r in est.history_ if "dev_arg_c" in r]
        if dev_scores:
            final["best_dev_arg_c"] = max(dev_scores)
        finals.append(final)
        click.echo(f"seed {run_seed}: checkpoint written to {run_dir / 'model.pt'}")

    if len(seed_list) > 1:
        aggregate = {"runs": finals}
        for key in ("final_loss", "best_dev_arg_c"):
            values = [f[key] for f in finals if key in f]
            if values:
                aggregate[key] = {
                    "mean": statistics.mean(values),
                    "std": statistics.stdev(values) if len(values) > 1 else 0.0,
                }
        with open(out_dir / "aggregate.json", "w") as f:
            json.dump(aggregate, f, indent=2)
        click.echo(f"aggregate report written to {out_dir / 'aggregate.json'}")


@main.command("eval")
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--format", "data_format", type=click.Choice(CORPUS_FORMATS),
              default="native-jsonl", show_default=True)
@click.option("--analyses", default="event_count,overlap,distance", show_default=True,
              help="Comma-separated subset of: buckets|event_count, overlap, distance.")
@click.option("--infer-mode", type=click.Choice(["single", "multi"]), default=None,
              help="Override the checkpoint's inference mode (diagnostic).")
@click.option("--window", type=int, default=None)
@click.option("--plots", is_flag=True, default=False)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_eval(checkpoint, data, data_format, analyses, infer_mode, window, plots, out):
    """Predict with a checkpoint and write the evaluation report."""
    requested = []
    for name in analyses.split(","):
        name = name.strip()
        if not name:
            continue
        if name not in _ANALYSIS_ALIASES:
            raise click.UsageError(
                f"unknown analysis {name!r}; expected buckets, overlap or distance")
        requested.append(_ANALYSIS_ALIASES[name])

    if not Path(checkpoint).is_file():
        raise _fail(f"checkpoint not found: {checkpoint}")
    try:
        est = TableArgumentExtractor.load(checkpoint)
        corpus = load_corpus(data, data_format, registry=est.pipeline_.registry)
    except (CorpusError, SchemaError, ValueError, OSError) as e:
        raise _fail(str(e))

    scheme = est.scheme_
    if infer_mode is not None:
        try:
            scheme = SchemeConfig(scheme.train_mode, infer_mode)
        except ValueError as e:
            raise click.UsageError(str(e))
    window = window if window is not None else est.train_config_.context_window
    predictions = predict_corpus(corpus, scheme, est.pipeline_, window)
    report = evaluate(corpus, predictions, analyses=tuple(requested) or ANALYSES)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "checkpoint": str(checkpoint),
        "data": str(data),
        "scheme": scheme.name,
        "toggles": est.pipeline_.toggles.to_dict(),
        "report": report.to_dict(),
    }
    with open(out_dir / "report.json", "w") as f:
        json.dump(payload, f, indent=2)
    with open(out_dir / "predictions.jsonl", "w") as f:
        for inst, inst_preds in zip(corpus, predictions):
            for event_index, event_preds in enumerate(inst_preds):
                for role, span, score in event_preds:
                    f.write(json.dumps({
                        "doc_id": inst.doc_id, "event_index": event_index,
                        "role": role, "span": list(span), "score": score,
                    }) + "\n")
    if plots:
        try:
            write_plots(report, corpus, out_dir)
        except RuntimeError as e:
            raise _fail(str(e))
    click.echo(f"Arg-I F1 {report.arg_i.f1:.4f}  Arg-C F1 {report.arg_c.f1:.4f}")
    click.echo(f"report written to {out_dir / 'report.json'}")


if __name__ == "__main__":
    main()
