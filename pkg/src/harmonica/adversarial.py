"""Stochastic adversarial search guided by the deviation metric, plus batch
stability statistics.

Each step builds a ball around the current point, measures gamma at every
ball point (each with its own ball), and moves to the candidate with the
largest gamma; ties break toward the lowest candidate index.  Sampled ball
schemes are re-drawn freshly at every step and for every inner gamma, which
is what makes the walk a stochastic ascent.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import predicted_stability
from .errors import EvaluationError, HarmonicaError
from .gamma import derive_seed, gamma_point
from .geometry import ball_points
from .models import OutputProjection, class_probability, predicted_label


@dataclass
class TraceStep:
    point: np.ndarray
    gamma: float
    label: int
    changed_coord: object   # coordinate index for one-hot schemes, else None
    delta: object           # signed displacement on that coordinate, else None
    candidate_gammas: object  # measured gammas of all candidates (debug only)
    chosen_index: int


@dataclass
class AdversarialTrace:
    origin: np.ndarray
    origin_label: int
    steps: list
    spec: object
    n_steps: int
    seed: int
    stable: bool
    early_exited: bool

    @property
    def final_point(self):
        return self.steps[-1].point if self.steps else self.origin


def _resolve_projection(model, projection, origin_output):
    proj = projection or OutputProjection(
        "scalar" if model.output_dim == 1 else "class-logit")
    # The class logit is pinned to the prediction at the trajectory origin
    # and reused for every gamma along the walk.
    return proj.resolve(origin_output) if proj.mode == "class-logit" else proj


def adversarial_search(model, x, spec, n_steps, projection=None, seed=None,
                       early_exit=False, debug=False):
    """Run the gamma-ascent walk for n_steps from x.

    ``seed`` defaults to spec.seed and drives the fresh per-step and
    per-candidate ball samples.  ``early_exit=True`` stops the walk at the
    first label flip (the trace is then shorter than n_steps and marked
    unstable).  ``debug=True`` records every candidate's measured gamma.
    """
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("the search needs at least one step")
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"start point of dimension {x.shape} does not match "
                         f"model input dimension {model.input_dim}")
    seed = spec.seed if seed is None else int(seed)
    dom = model.domain
    if dom is not None:
        x = dom.prepare(x[None, :])[0]

    origin_output = model.eval(x)
    origin_label = predicted_label(origin_output)
    proj = _resolve_projection(model, projection, origin_output)

    steps = []
    cur = x
    early_exited = False
    for t in range(n_steps):
        step_spec = spec.reseeded(derive_seed(seed, t, 0)) if spec.sampled else spec
        raw = ball_points(cur, step_spec)
        cands = dom.prepare(raw) if dom is not None else raw

        # One batched evaluation per step: candidates first, then each
        # candidate's own ball, so remote backends see a single message.
        inner = []
        for i in range(cands.shape[0]):
            ispec = (step_spec.reseeded(derive_seed(seed, t, i + 1))
                     if spec.sampled else step_spec)
            inner.append(ball_points(cands[i], ispec))
        k_in = inner[0].shape[0]
        try:
            outs = model.eval_batch(np.vstack([cands] + inner))
        except HarmonicaError as exc:
            raise EvaluationError(f"model evaluation failed at search step "
                                  f"{t + 1}: {exc}",
                                  point=getattr(exc, "point", None)) from exc
        values = proj.apply_batch(outs)
        cand_vals = values[:cands.shape[0]]
        ball_vals = values[cands.shape[0]:].reshape(cands.shape[0], k_in)
        gammas = np.abs(cand_vals - ball_vals.mean(axis=1))

        best = int(np.argmax(gammas))  # first maximum = lowest index on ties
        disp = raw[best] - cur
        if spec.one_hot:
            coord = int(np.argmax(np.abs(disp)))
            changed, delta = coord, float(disp[coord])
        else:
            changed, delta = None, None
        cur = cands[best]
        label = predicted_label(outs[best])
        steps.append(TraceStep(
            point=cur, gamma=float(gammas[best]), label=label,
            changed_coord=changed, delta=delta,
            candidate_gammas=gammas.copy() if debug else None,
            chosen_index=best))
        if early_exit and label != origin_label:
            early_exited = True
            break

    stable = steps[-1].label == origin_label
    return AdversarialTrace(origin=x, origin_label=origin_label, steps=steps,
                            spec=spec, n_steps=n_steps, seed=seed,
                            stable=stable, early_exited=early_exited)


@dataclass
class SampleRecord:
    """Per-sample output feeding the stability map: (prob, gamma, stable)."""

    index: int
    prob: float
    gamma: float
    stable: bool
    pred_label: int
    true_label: object = None


@dataclass
class StabilityStats:
    class_id: int
    count: int
    accuracy_pct: object  # None when no ground-truth labels were supplied
    stability_pct: float
    mean_gamma: float
    mean_class_prob: float
    predicted_stability: float


def batch_stability(model, dataset, spec, n_steps, projection=None,
                    true_labels=None, seed=0, jobs=1, lenient=False,
                    early_exit=False):
    """Run the search on every sample and aggregate per predicted class.

    Returns (stats, records): stats one row per predicted class sorted by
    class id, records one entry per sample in dataset order.
    """
    dataset = [np.asarray(x, dtype=float) for x in dataset]
    if not dataset:
        raise ValueError("batch stability needs a non-empty dataset")
    if true_labels is not None and len(true_labels) != len(dataset):
        raise ValueError("true_labels length does not match the dataset")

    def one(i):
        x = dataset[i]
        try:
            origin_out = model.eval(x if model.domain is None
                                    else model.domain.prepare(x[None, :])[0])
            pred = predicted_label(origin_out)
            prob = class_probability(origin_out, pred)
            g = gamma_point(model, x, spec.reseeded(derive_seed(seed, i, 1)),
                            projection).gamma
            trace = adversarial_search(model, x, spec, n_steps, projection,
                                       seed=derive_seed(seed, i, 0),
                                       early_exit=early_exit)
            true = None if true_labels is None else true_labels[i]
            return SampleRecord(index=i, prob=prob, gamma=g,
                                stable=trace.stable, pred_label=pred,
                                true_label=true), None
        except HarmonicaError as exc:
            return None, exc

    n_jobs = min(max(1, int(jobs)), model.max_concurrency or 1 << 30)
    if n_jobs == 1:
        outcomes = [one(i) for i in range(len(dataset))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(one, range(len(dataset))))

    records, skipped = [], 0
    for i, (rec, exc) in enumerate(outcomes):
        if exc is not None:
            if not lenient:
                raise EvaluationError(f"sample {i} failed: {exc}",
                                      point=getattr(exc, "point", None)) from exc
            skipped += 1
            continue
        records.append(rec)
    if not records:
        raise EvaluationError(f"all {skipped} samples failed")

    stats = []
    for cls in sorted({r.pred_label for r in records}):
        group = [r for r in records if r.pred_label == cls]
        have_truth = any(r.true_label is not None for r in group)
        acc = (100.0 * np.mean([r.true_label == r.pred_label for r in group])
               if have_truth else None)
        stats.append(StabilityStats(
            class_id=cls,
            count=len(group),
            accuracy_pct=acc,
            stability_pct=100.0 * float(np.mean([r.stable for r in group])),
            mean_gamma=float(np.mean([r.gamma for r in group])),
            mean_class_prob=float(np.mean([r.prob for r in group])),
            predicted_stability=float(np.mean(
                [predicted_stability(r.prob, r.gamma, n_steps) for r in group])),
        ))
    return stats, records


def _fmt(v):
    return repr(float(v))


def write_trace_jsonl(trace, path):
    """One JSON object per step: step number, gamma, label, changed coord."""
    with open(path, "w") as fh:
        for k, s in enumerate(trace.steps, start=1):
            fh.write(json.dumps({
                "step": k,
                "gamma": s.gamma,
                "label": s.label,
                "changed_coord": s.changed_coord,
                "delta": s.delta,
            }) + "\n")


def write_stability_csv(stats, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "count", "accuracy_pct", "stability_pct",
                    "mean_gamma", "mean_prob", "predicted_stability"])
        for s in stats:
            w.writerow([s.class_id, s.count,
                        "" if s.accuracy_pct is None else _fmt(s.accuracy_pct),
                        _fmt(s.stability_pct), _fmt(s.mean_gamma),
                        _fmt(s.mean_class_prob), _fmt(s.predicted_stability)])


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["idx", "prob", "gamma", "stable", "pred_label", "true_label"])
        for r in records:
            w.writerow([r.index, _fmt(r.prob), _fmt(r.gamma), int(r.stable),
                        r.pred_label,
                        "" if r.true_label is None else int(r.true_label)])


def read_records_csv(path):
    """Read (prob, gamma, stable) triples from a records file by column name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"prob", "gamma", "stable"} <= set(
                reader.fieldnames):
            raise ValueError(f"{path} lacks the prob,gamma,stable columns")
        rows = [(float(row["prob"]), float(row["gamma"]),
                 bool(int(row["stable"]))) for row in reader]
    return rows
