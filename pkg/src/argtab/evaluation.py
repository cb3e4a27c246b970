"""Strict micro-F1 scoring and the analysis breakdowns.

Arg-I counts a predicted argument as correct when its word span equals any
golden argument span of the event; Arg-C additionally requires the role to
match. Duplicate predictions of one golden argument count once as true
positive, extras as false positives. Scores are micro-averaged over all
events.

Analyses: per-event-count buckets (#Ev = 1 vs > 1), the overlapping-event
split (events sharing a gold argument span with another event of the same
instance), and Arg-C as a function of trigger-to-argument word distance.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .corpus import EAEInstance

# Distance buckets, as boundaries between them; d <= first, ..., d > last.
DEFAULT_DISTANCE_EDGES = (-50, -20, -5, 0, 5, 20, 50)

ANALYSES = ("event_count", "overlap", "distance")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0


def _prf(tp: int, fp: int, fn: int) -> PRF:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1, tp, fp, fn)


@dataclass(frozen=True)
class BucketScore:
    arg_c: PRF
    support: int


@dataclass
class EvalReport:
    arg_i: PRF
    arg_c: PRF
    buckets: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def prf(x: PRF):
            return {"precision": x.precision, "recall": x.recall, "f1": x.f1,
                    "tp": x.tp, "fp": x.fp, "fn": x.fn}

        return {
            "arg_i": prf(self.arg_i),
            "arg_c": prf(self.arg_c),
            "analyses": {
                name: {label: {"arg_c": prf(b.arg_c), "support": b.support}
                       for label, b in table.items()}
                for name, table in self.buckets.items()
            },
        }


def _normalize(predictions):
    """Accept (role, span) or (role, span, score) items; keep (role, span)."""
    return [
        [
            [(item[0], tuple(item[1])) for item in event_preds]
            for event_preds in inst_preds
        ]
        for inst_preds in predictions
    ]


def _check_aligned(instances, predictions):
    if len(predictions) != len(instances):
        raise ValueError(
            f"got predictions for {len(predictions)} instances, expected "
            f"{len(instances)}"
        )
    for inst, inst_preds in zip(instances, predictions):
        if len(inst_preds) != inst.num_events:
            raise ValueError(
                f"doc {inst.doc_id}: predictions for {len(inst_preds)} events, "
                f"instance has {inst.num_events}"
            )


def _event_counts(event, pred_args):
    """(tp_arg_i, tp_arg_c, n_pred, n_gold) for one event, multiset matching."""
    gold_rc = Counter((a.role, a.span) for a in event.arguments)
    gold_spans = Counter(a.span for a in event.arguments)
    pred_rc = Counter(pred_args)
    pred_spans = Counter(span for _, span in pred_args)
    tp_c = sum(min(c, gold_rc[key]) for key, c in pred_rc.items())
    tp_i = sum(min(c, gold_spans[span]) for span, c in pred_spans.items())
    return tp_i, tp_c, len(pred_args), len(event.arguments)


def score(instances, predictions) -> EvalReport:
    """Micro-averaged Arg-I / Arg-C over all events."""
    predictions = _normalize(predictions)
    _check_aligned(instances, predictions)
    tp_i = tp_c = n_pred = n_gold = 0
    for inst, inst_preds in zip(instances, predictions):
        for event, pred_args in zip(inst.events, inst_preds):
            i, c, p, g = _event_counts(event, pred_args)
            tp_i += i
            tp_c += c
            n_pred += p
            n_gold += g
    return EvalReport(
        arg_i=_prf(tp_i, n_pred - tp_i, n_gold - tp_i),
        arg_c=_prf(tp_c, n_pred - tp_c, n_gold - tp_c),
    )


def _bucketed_scores(counts: dict) -> dict:
    return {
        label: BucketScore(arg_c=_prf(tp, p - tp, g - tp), support=support)
        for label, (tp, p, g, support) in counts.items()
    }


def bucket_by_event_count(instances, predictions) -> dict:
    """Arg-C split over events of single-event vs multi-event instances."""
    predictions = _normalize(predictions)
    _check_aligned(instances, predictions)
    counts = {"#Ev=1": [0, 0, 0, 0], "#Ev>1": [0, 0, 0, 0]}
    for inst, inst_preds in zip(instances, predictions):
        label = "#Ev=1" if inst.num_events == 1 else "#Ev>1"
        for event, pred_args in zip(inst.events, inst_preds):
            _, c, p, g = _event_counts(event, pred_args)
            bucket = counts[label]
            bucket[0] += c
            bucket[1] += p
            bucket[2] += g
            bucket[3] += 1
    return _bucketed_scores({k: tuple(v) for k, v in counts.items()})


def is_overlapping(instance: EAEInstance, event_index: int) -> bool:
    """True when the event shares a gold argument span with another event."""
    own = {a.span for a in instance.events[event_index].arguments}
    for j, other in enumerate(instance.events):
        if j == event_index:
            continue
        if own & {a.span for a in other.arguments}:
            return True
    return False


def overlap_split(instances, predictions) -> dict:
    """Arg-C split over events with vs without shared argument spans."""
    predictions = _normalize(predictions)
    _check_aligned(instances, predictions)
    counts = {"non-overlapping": [0, 0, 0, 0], "overlapping": [0, 0, 0, 0]}
    for inst, inst_preds in zip(instances, predictions):
        for idx, (event, pred_args) in enumerate(zip(inst.events, inst_preds)):
            label = "overlapping" if is_overlapping(inst, idx) else "non-overlapping"
            _, c, p, g = _event_counts(event, pred_args)
            bucket = counts[label]
            bucket[0] += c
            bucket[1] += p
            bucket[2] += g
            bucket[3] += 1
    return _bucketed_scores({k: tuple(v) for k, v in counts.items()})


def distance_labels(edges=DEFAULT_DISTANCE_EDGES) -> list[str]:
    edges = sorted(edges)
    labels = [f"<={edges[0]}"]
    labels += [f"{a + 1}..{b}" for a, b in zip(edges, edges[1:])]
    labels.append(f">{edges[-1]}")
    return labels


def _distance_bucket(d: int, edges) -> str:
    labels = distance_labels(edges)
    for i, edge in enumerate(sorted(edges)):
        if d <= edge:
            return labels[i]
    return labels[-1]


def argument_distance(trigger_span, arg_span) -> int:
    """Head-word distance: first word of the argument minus first word of the
    trigger; negative when the argument is left of the trigger."""
    return arg_span[0] - trigger_span[0]


def distance_curve(instances, predictions, edges=DEFAULT_DISTANCE_EDGES) -> dict:
    """Arg-C per trigger-to-argument distance bucket; support counts golden
    arguments (the buckets partition arguments, not events)."""
    predictions = _normalize(predictions)
    _check_aligned(instances, predictions)
    counts = {label: [0, 0, 0, 0] for label in distance_labels(edges)}
    for inst, inst_preds in zip(instances, predictions):
        for event, pred_args in zip(inst.events, inst_preds):
            gold_rc = Counter((a.role, a.span) for a in event.arguments)
            pred_rc = Counter(pred_args)
            for (role, span), c in gold_rc.items():
                bucket = counts[_distance_bucket(argument_distance(event.trigger, span), edges)]
                bucket[0] += min(c, pred_rc[(role, span)])
                bucket[2] += c
                bucket[3] += c
            for (role, span), c in pred_rc.items():
                bucket = counts[_distance_bucket(argument_distance(event.trigger, span), edges)]
                bucket[1] += c
    return _bucketed_scores({k: tuple(v) for k, v in counts.items()})


def evaluate(instances, predictions, analyses=ANALYSES,
             distance_edges=DEFAULT_DISTANCE_EDGES) -> EvalReport:
    """Full report: overall scores plus the requested analysis tables."""
    report = score(instances, predictions)
    for name in analyses:
        if name == "event_count":
            report.buckets[name] = bucket_by_event_count(instances, predictions)
        elif name == "overlap":
            report.buckets[name] = overlap_split(instances, predictions)
        elif name == "distance":
            report.buckets[name] = distance_curve(instances, predictions,
                                                  edges=distance_edges)
        else:
            raise ValueError(f"unknown analysis {name!r}; expected one of {ANALYSES}")
    return report


def write_plots(report: EvalReport, instances, out_dir) -> list[str]:
    """Static plots for the distance curve and the event-count histogram."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise RuntimeError(
            "plotting requires matplotlib (pip install argtab[plots])"
        ) from e
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if "distance" in report.buckets:
        table = report.buckets["distance"]
        labels = list(table)
        values = [table[k].arg_c.f1 for k in labels]
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(labels, values, marker="o")
        ax.set_xlabel("trigger-to-argument word distance")
        ax.set_ylabel("Arg-C F1")
        ax.tick_params(axis="x", rotation=45)
        fig.tight_layout()
        path = out_dir / "distance_curve.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))

    hist = Counter(inst.num_events for inst in instances)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    keys = sorted(hist)
    ax.bar([str(k) for k in keys], [hist[k] for k in keys])
    ax.set_xlabel("events per instance")
    ax.set_ylabel("instances")
    fig.tight_layout()
    path = out_dir / "event_count_hist.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(str(path))
    return written
