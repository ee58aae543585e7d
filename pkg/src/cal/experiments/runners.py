"""Experiment runners.

Every runner takes a merged configuration mapping (see :mod:`.config`) and an
optional output directory, drives a :class:`~cal.network.Network` and returns a
:class:`Report`.  With an output directory it also writes ``metrics.csv``, the
experiment's matrices as CSV and PGM, ``snapshot.zip`` and ``report.json``.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
from scipy.ndimage import binary_dilation

from ..bitvec import SparseBitVector, jaccard, split
from ..correlator import covariance
from ..network import Network, TopologySpec, build, snapshot
from .config import deep_merge
from .generators import (
    SENTENCES,
    SHAPES,
    ShapeSpec,
    gen_lissajous,
    gen_shape_frame,
    popeq_series,
    sentence_order,
    split_fields,
)
from .metrics import (
    RMS_WINDOW,
    MetricsRow,
    RunningMean,
    RunningRMS,
    lissajous_support,
    similarity_matrix,
    write_matrix_csv,
    write_matrix_pgm,
    write_metrics,
)

__all__ = [
    "Report",
    "RUNNERS",
    "run",
    "build_network",
    "popeq_ticks",
    "run_reconstruction",
    "run_lissajous",
    "run_popeq",
    "run_persistence",
    "run_shapes",
    "run_association",
    "run_forgetting",
]


@dataclass
class Report:
    """Outcome of one run: pass/fail checks, headline numbers and written files.

    Wall time is kept out of ``report.json`` so reruns produce identical files.
    """

    experiment: str
    seed: int
    checks: dict[str, bool] = field(default_factory=dict)
    values: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "values": _plain(self.values),
            "files": self.files,
        }

    def summary(self) -> str:
        lines = [f"{self.experiment} (seed {self.seed}): {'PASS' if self.passed else 'FAIL'} "
                 f"in {self.seconds:.1f} s"]
        for name, ok in self.checks.items():
            lines.append(f"  [{'ok' if ok else 'FAILED'}] {name}")
        for name, v in self.values.items():
            if np.ndim(v) == 0:
                lines.append(f"  {name} = {v}")
        return "\n".join(lines)


def _plain(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


class _Output:
    """Writes run artifacts into ``root`` when given; otherwise does nothing."""

    def __init__(self, root: str | Path | None, report: Report):
        self.root = None if root is None else Path(root)
        self.report = report
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path | None:
        if self.root is None:
            return None
        self.report.files.append(name)
        return self.root / name

    def metrics(self, rows, name: str = "metrics.csv") -> None:
        p = self.path(name)
        if p is not None:
            write_metrics(p, rows)

    def matrix(self, stem: str, mat: np.ndarray, labels=None) -> None:
        p = self.path(f"{stem}.csv")
        if p is not None:
            write_matrix_csv(p, mat, labels)
            write_matrix_pgm(self.path(f"{stem}.pgm"), mat)

    def table(self, name: str, header: list[str], rows) -> None:
        p = self.path(name)
        if p is not None:
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)

    def snapshot(self, net: Network, name: str = "snapshot.zip") -> None:
        p = self.path(name)
        if p is not None:
            snapshot(net, p)

    def finish(self, started: float) -> Report:
        self.report.seconds = time.perf_counter() - started
        p = self.path("report.json")
        if p is not None:
            p.write_text(json.dumps(self.report.to_dict(), indent=1, sort_keys=True) + "\n")
        return self.report


def build_network(cfg: Mapping[str, Any], topology: Mapping[str, Any] | None = None, workers: int = 1) -> Network:
    """Network for ``cfg['topology']`` (optionally merged with ``topology``) seeded by ``cfg['seed']``."""
    doc = dict(cfg["topology"])
    if topology:
        doc = deep_merge(doc, topology)
    doc["seed"] = int(cfg["seed"])
    return build(TopologySpec.from_dict(doc), workers)


def _region_ids(net: Network) -> list[str]:
    return [r.id for r in net.spec.regions]


# -- reconstruction -------------------------------------------------------------

def _single_region(name: str, sensors: list[dict], columns: int, k: int | None, correlator: dict) -> dict:
    region = {"id": "R1", "level": 1, "columns": columns, "correlator": correlator,
              "sequence_memory": {"enabled": False}}
    if k is not None:
        region["k"] = k
    return {"name": name, "sensors": sensors, "regions": [region],
            "feedforward": [[s["name"], "R1"] for s in sensors]}


def integer_round_trip(ic: Mapping[str, Any], seed: int) -> tuple[float, list[list[str]]]:
    """Sweep every value through a hardwired correlator; returns (worst abs error, table rows)."""
    net = build_network({"seed": seed, "topology": _single_region(
        "integer", [{"name": "v", "kind": "integer", "min": ic["min"], "max": ic["max"], "k": ic["k"]}],
        ic["columns"], ic.get("active_columns"), {"mode": "hardwired", "fanin": ic["fanin"]})})
    rows, worst = [], 0.0
    for v in range(int(ic["min"]), int(ic["max"]) + 1):
        p = net.tick({"v": v}, learn=False)["R1"].predictions[0]
        err = math.inf if p is None else abs(p - v)
        worst = max(worst, err)
        rows.append([v, "" if p is None else f"{p:g}", "" if p is None else f"{err:g}"])
    return worst, rows


def real_stream(rc: Mapping[str, Any], rng: np.random.Generator,
                seed: int) -> tuple[float, int, list[MetricsRow]]:
    """Uniform samples through a hardwired correlator; returns (RMS error, missing count, rows)."""
    net = build_network({"seed": seed, "topology": _single_region(
        "real", [{"name": "s", "kind": "real", "min": rc["min"], "max": rc["max"],
                  "resolution": rc["resolution"], "k": rc["k"]}],
        rc["columns"], rc.get("active_columns"), {"mode": "hardwired", "fanin": rc["fanin"]})})
    samples = rng.uniform(rc["min"], rc["max"], int(rc["samples"]))
    rms = RunningRMS()
    sq, missing, rows = 0.0, 0, []
    for t, s in enumerate(samples.tolist(), start=1):
        p = net.tick({"s": s}, learn=False)["R1"].predictions[0]
        err = None if p is None else p - s
        if err is None:
            missing += 1
        else:
            sq += err * err
        rows.append(MetricsRow(t, {"s": s}, {"s": p}, {"s": None if err is None else abs(err)}, rms.push(err),
                               p is not None))
    return math.sqrt(sq / max(1, len(samples) - missing)), missing, rows


def run_reconstruction(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Reverse pass of the correlator on integer, real and learned inputs."""
    t0 = time.perf_counter()
    seed = int(cfg["seed"])
    report = Report("reconstruction", seed)
    o = _Output(out, report)

    # integer sweep: every value must come back exactly
    worst, int_rows = integer_round_trip(cfg["integer"], seed)
    o.table("integer.csv", ["value", "reconstruction", "abs_error"], int_rows)
    report.values["integer_max_abs_error"] = worst
    report.checks["integer round trip is exact"] = worst == 0.0

    # uniform real stream: quantization error only
    rc = cfg["real"]
    rng = np.random.default_rng(seed)
    real_rms, missing, rows = real_stream(rc, rng, seed)
    o.metrics(rows)
    floor = rc["resolution"] / math.sqrt(12.0)
    tol = cfg["checks"]["floor_tolerance"]
    report.values.update(real_rms=real_rms, real_floor=floor, real_missing=missing)
    report.checks["real-stream RMS matches the digitization floor"] = (
        missing == 0 and abs(real_rms - floor) <= tol * floor)

    # learned correlator with two channels and skewed value frequencies
    lc = cfg["learning"]
    nv = int(lc["values"])
    sensors = [{"name": n, "kind": "integer", "min": 0, "max": nv - 1, "k": lc["k"]} for n in ("u", "w")]
    net = build_network({"seed": seed, "topology": _single_region(
        "learning", sensors, lc["columns"], lc["active_columns"], {"mode": "learning"})})
    prob = 1.0 / np.arange(1, nv + 1) ** float(lc["zipf"])
    prob /= prob.sum()
    draws = rng.choice(nv, size=(int(lc["iterations"]), 2), p=prob)
    correct = np.zeros(len(draws), dtype=bool)
    last_wrong = np.full(nv, -1)
    first_seen = np.full(nv, -1)
    for t, (u, w) in enumerate(draws.tolist()):
        # score the reconstruction before this sample is learned, then learn it
        preds = net.tick({"u": u, "w": w}, learn=False)["R1"].predictions
        net.tick({"u": u, "w": w})
        ok = preds[0] == u and preds[1] == w
        correct[t] = ok
        for v, p in ((u, preds[0]), (w, preds[1])):
            if first_seen[v] < 0:
                first_seen[v] = t
            if p != v:
                last_wrong[v] = t
    win = int(lc["window"])
    acc = [float(correct[i:i + win].mean()) for i in range(0, len(correct), win)]
    o.table("learning_accuracy.csv", ["window_start", "accuracy"], [[i * win, f"{a:.6g}"] for i, a in enumerate(acc)])
    seen = np.flatnonzero(first_seen >= 0)
    settle = last_wrong[seen] + 1  # iterations needed until the value is always reconstructed
    q = max(1, len(seen) // 4)
    frequent, rare = seen[:q], seen[-q:]  # values are ordered by decreasing probability
    report.values.update(learning_accuracy_first=acc[0], learning_accuracy_last=acc[-1],
                         settle_frequent=float(np.mean(last_wrong[frequent] + 1)),
                         settle_rare=float(np.mean(last_wrong[rare] + 1)),
                         settle_by_value=settle.tolist())
    report.checks["learned reconstruction accuracy rises"] = acc[-1] > acc[0]
    report.checks["rare values settle later than frequent ones"] = (
        report.values["settle_rare"] > report.values["settle_frequent"])
    o.snapshot(net)
    return o.finish(t0)


# -- lissajous ------------------------------------------------------------------

def run_lissajous(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Learn the joint statistics of two phase-locked sinusoids; compare W^T W with the ideal curve."""
    t0 = time.perf_counter()
    report = Report("lissajous", int(cfg["seed"]))
    o = _Output(out, report)
    net = build_network(cfg)
    rid = _region_ids(net)[0]
    names = [s.name for s in net.spec.sensors]
    n_it = int(cfg["iterations"])
    rms = RunningRMS(RMS_WINDOW * len(names))
    rows: list[MetricsRow] = []
    sq = np.full((n_it, len(names)), np.nan)
    for t in range(n_it):
        s = gen_lissajous(t)
        preds = net.tick(dict(zip(names, s)))[rid].predictions
        errs = [None if p is None else p - v for p, v in zip(preds, s)]
        for e in errs:
            r = rms.push(e)
        sq[t] = [np.nan if e is None else e * e for e in errs]
        rows.append(MetricsRow(t, dict(zip(names, s)), dict(zip(names, preds)),
                               {n: None if e is None else abs(e) for n, e in zip(names, errs)}, r,
                               all(p is not None for p in preds)))
    o.metrics(rows)

    region = net.regions[rid]
    enc = net.spec.sensor(names[0]).encoder
    cov = covariance(region.correlator)
    quad = cov[:enc.N, enc.N:]
    ideal = lissajous_support(enc, [gen_lissajous(t) for t in range(360)])
    near = binary_dilation(ideal, np.ones((3, 3), dtype=bool))
    nz = quad > 0
    within = float((nz & near).sum() / nz.sum()) if nz.any() else 0.0
    covered = float((binary_dilation(nz, np.ones((3, 3), dtype=bool)) & ideal).sum() / ideal.sum())
    o.matrix("covariance", cov)
    o.matrix("covariance_quadrant", quad)
    o.matrix("ideal_support", ideal.astype(np.int64))

    tail = int(cfg["checks"]["rms_tail"])
    tail_sq = sq[-tail:]
    missing_tail = int(np.isnan(tail_sq).sum())
    tail_rms = float(np.sqrt(np.nanmean(tail_sq))) if missing_tail < tail_sq.size else math.inf
    head_rms = float(np.sqrt(np.nanmean(sq[:min(1000, n_it)])))
    report.values.update(nonzero_entries=int(nz.sum()), within_one_bin=within, curve_covered=covered,
                         rms_first_1000=head_rms, rms_tail=tail_rms, missing_in_tail=missing_tail,
                         connected_synapses=int(region.correlator.array.connected().sum()))
    ck = cfg["checks"]
    report.checks["covariance support lies on the ideal curve"] = nz.any() and within >= ck["support_within"]
    report.checks["reconstruction RMS levels off"] = missing_tail == 0 and tail_rms <= ck["rms_max"]
    o.snapshot(net)
    return o.finish(t0)


# -- population equation --------------------------------------------------------

def popeq_ticks(net: Network, series: np.ndarray, stop: int, rows: list[MetricsRow]) -> None:
    """Advance a single-region predictor from its current tick through iteration ``stop``.

    Iteration ``t`` (1-based) feeds ``series[t-1]`` and scores the prediction
    made on the previous iteration.  The pending prediction and the RMS window
    live in ``net.extra`` so a restored snapshot continues seamlessly.
    """
    rid = _region_ids(net)[0]
    name = net.spec.sensors[0].name
    state = net.extra.setdefault("popeq", {"prediction": None, "window": []})
    rms = RunningRMS()
    rms.buf.extend(state["window"])
    sm = net.regions[rid].sm
    for t in range(net.tick_count + 1, stop + 1):
        s = float(series[t - 1])
        pred = state["prediction"]
        err = None if pred is None else pred - s
        r = rms.push(err)
        out = net.tick({name: s})[rid]
        state["prediction"] = out.predictions[0] if out.z.cardinality else None
        state["window"] = list(rms.buf)
        rows.append(MetricsRow(t, {name: s}, {name: pred}, {name: None if err is None else abs(err)}, r,
                               pred is not None, {}, {rid: sm.W.connected_fraction() if sm else 0.0}))


def run_popeq(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Next-step prediction of the chaotic logistic map."""
    t0 = time.perf_counter()
    report = Report("popeq", int(cfg["seed"]))
    o = _Output(out, report)
    net = build_network(cfg)
    n_it = int(cfg["iterations"])
    series = popeq_series(n_it, float(cfg["s0"]), float(cfg["beta"]))
    rows: list[MetricsRow] = []
    popeq_ticks(net, series, n_it, rows)
    o.metrics(rows)

    ck = cfg["checks"]
    have = [r.tick for r in rows if r.has_prediction]
    first = have[0] if have else None
    gaps = [r.tick for r in rows if not r.has_prediction and r.tick >= ck["always_predict_from"]]
    span = [r.rms for r in rows if ck["rms_from"] <= r.tick <= ck["rms_to"]]
    worst = max((v for v in span if v is not None), default=math.inf)
    report.values.update(first_prediction=first, last_missing=max((r.tick for r in rows if not r.has_prediction),
                                                                   default=None),
                         missing_after_start=len(gaps), worst_rms_in_span=worst,
                         final_rms=rows[-1].rms if rows else None)
    report.checks["first valid prediction early"] = first is not None and first <= ck["first_prediction_by"]
    report.checks["predicts every iteration once warmed up"] = not gaps
    report.checks["running RMS stays below the target"] = bool(span) and worst < ck["rms_max"]
    o.snapshot(net)
    return o.finish(t0)


# -- persistence ----------------------------------------------------------------

def run_persistence(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Stability of each level's output while reading sentences."""
    t0 = time.perf_counter()
    report = Report("persistence", int(cfg["seed"]))
    o = _Output(out, report)
    net = build_network(cfg)
    ids = _region_ids(net)
    name = net.spec.sensors[0].name
    per_epoch = int(cfg["sentences_per_epoch"])
    epochs = int(cfg["epochs"])
    order = sentence_order(epochs * per_epoch, np.random.default_rng(int(cfg["seed"])), len(SENTENCES))
    running = {r: RunningMean() for r in ids}
    rows: list[MetricsRow] = []
    epoch_means = np.zeros((epochs, len(ids)))
    for e in range(epochs):
        raw = {r: [] for r in ids}
        for si in order[e * per_epoch:(e + 1) * per_epoch]:
            for ch in SENTENCES[si]:
                outs = net.tick({name: ord(ch)})
                first = outs[ids[0]]
                pred = first.predictions[0] if first.predictions and first.z.cardinality else None
                for r in ids:
                    raw[r].append(outs[r].persistence)
                rows.append(MetricsRow(net.tick_count, {name: ord(ch)}, {name: pred}, {}, None, pred is not None,
                                       {r: running[r].push(outs[r].persistence) for r in ids}))
        epoch_means[e] = [np.mean(raw[r]) for r in ids]
    o.metrics(rows)
    o.matrix("epoch_persistence", epoch_means, None)
    final = epoch_means[-1]
    report.values.update(sentence_order=order, **{f"final_persistence_{r}": float(v) for r, v in zip(ids, final)})
    report.checks["top level persistence is high"] = final[-1] >= cfg["checks"]["top_min"]
    report.checks["persistence increases with level"] = bool(np.all(np.diff(final) > 0))
    o.snapshot(net)
    return o.finish(t0)


# -- rotating shapes -----------------------------------------------------------

def shape_frames(size: int, step: float, grid: int) -> list[list[list[np.ndarray]]]:
    """frames[shape][frame] -> list of ``grid*grid`` field images."""
    out = []
    for kind in SHAPES:
        spec = ShapeSpec(kind, size, step)
        out.append([split_fields(gen_shape_frame(spec, a), grid) for a in spec.angles()])
    return out


def similarity_by_group(vectors: list[SparseBitVector | None], groups: int) -> np.ndarray:
    """Mean pairwise Jaccard between groups of equal size, skipping self-pairs and gaps."""
    per = len(vectors) // groups
    full = np.full((len(vectors), len(vectors)), np.nan)
    idx = [i for i, v in enumerate(vectors) if v is not None]
    sim = similarity_matrix([vectors[i] for i in idx])
    full[np.ix_(idx, idx)] = sim
    np.fill_diagonal(full, np.nan)
    out = np.zeros((groups, groups))
    for a in range(groups):
        for b in range(groups):
            block = full[a * per:(a + 1) * per, b * per:(b + 1) * per]
            out[a, b] = np.nanmean(block)
    return out


def run_shapes(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Rotating outline shapes; invariance of the top level's active columns."""
    t0 = time.perf_counter()
    seed = int(cfg["seed"])
    report = Report("shapes", seed)
    o = _Output(out, report)
    net = build_network(cfg, workers=int(cfg.get("workers", 1)))
    ids = _region_ids(net)
    top = ids[-1]
    sensors = [s.name for s in net.spec.sensors]
    grid = int(round(math.sqrt(len(sensors))))
    frames = shape_frames(int(cfg["frame_size"]), float(cfg["step"]), grid)
    n_frames = len(frames[0])
    levels = max(r.level for r in net.spec.regions)
    delay = int(cfg.get("delay", levels - 1))
    # after a reset each level needs two ticks (burst, then verify) before it sends anything up
    warmup = int(cfg.get("warmup", 2 * (levels - 1)))
    rng = np.random.default_rng(seed)
    epochs = int(cfg["epochs"])
    reset = bool(cfg.get("reset_between_shapes", False))
    rows: list[MetricsRow] = []
    final: list[SparseBitVector | None] = []
    for e in range(epochs):
        order = rng.permutation(len(SHAPES)) if cfg.get("order", "random") == "random" else np.arange(len(SHAPES))
        tops = []
        for si in order.tolist():
            if reset:
                net.reset()
            for fi in range(n_frames):
                outs = net.tick(frames[si][fi])
                tops.append(outs[top].y)
                rows.append(MetricsRow(net.tick_count, {"shape": si, "frame": fi}, {}, {}, None, False,
                                       {r: outs[r].persistence for r in ids}))
        if e == epochs - 1:
            # output for frame n appears ``delay`` ticks later; frames whose output falls past the
            # end of the epoch or past a reset, or inside the post-reset warm-up, are left out
            final = [None] * (len(SHAPES) * n_frames)
            for n, si in enumerate(np.repeat(order, n_frames).tolist()):
                at = n % n_frames + delay
                if n + delay < len(tops) and not (reset and (at >= n_frames or at < warmup)):
                    final[si * n_frames + n % n_frames] = tops[n + delay]
    o.metrics(rows)
    sim = similarity_by_group(final, len(SHAPES))
    o.matrix("similarity", sim, list(SHAPES))
    cols = net.regions[top].config.geometry.n_col
    raster = np.zeros((len(final), cols), dtype=np.uint8)
    for i, v in enumerate(final):
        if v is not None:
            raster[i, v.active] = 1
    o.matrix("top_raster", raster)

    within = np.diag(sim).copy()
    cross = sim.copy()
    np.fill_diagonal(cross, -np.inf)
    a, b = np.unravel_index(np.argmax(cross), cross.shape)
    ck = cfg["checks"]
    report.values.update(within=dict(zip(SHAPES, within.tolist())),
                         max_cross=dict(zip(SHAPES, cross.max(axis=1).tolist())),
                         closest_pair=f"{SHAPES[min(a, b)]}-{SHAPES[max(a, b)]}",
                         frames_scored=sum(v is not None for v in final),
                         similarity=sim.tolist())
    report.checks["within-shape similarity high for most shapes"] = (
        int(np.sum(within >= ck["within_min"])) >= ck["within_count"])
    report.checks["every shape is closest to itself"] = bool(np.all(within > cross.max(axis=1)))
    report.checks["closest cross-shape pair is triangle and star6"] = (
        {SHAPES[a], SHAPES[b]} == set(ck["closest_pair"]))
    o.snapshot(net)
    return o.finish(t0)


# -- association ---------------------------------------------------------------

def _pattern(rng: np.random.Generator, width: int, active: int) -> np.ndarray:
    img = np.zeros((1, width), dtype=np.uint8)
    img[0, rng.choice(width, active, replace=False)] = 1
    return img


def run_association(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Train on concatenated pattern pairs, then recall one half from the other."""
    t0 = time.perf_counter()
    report = Report("association", int(cfg["seed"]))
    o = _Output(out, report)
    net = build_network(cfg)
    rid = _region_ids(net)[0]
    na, nb = (s.name for s in net.spec.sensors)
    width, active = int(cfg["width"]), int(cfg["active"])
    rng = np.random.default_rng(int(cfg["seed"]))
    n = int(cfg["pairs"])
    A = [_pattern(rng, width, active) for _ in range(n)]
    B = [_pattern(rng, width, active) for _ in range(n)]
    blank = np.zeros((1, width), dtype=np.uint8)
    for _ in range(int(cfg["presentations"])):
        for a, b in zip(A, B):
            net.tick({na: a, nb: b})

    def recall(a_img, b_img) -> tuple[SparseBitVector, SparseBitVector]:
        x_hat = net.tick({na: a_img, nb: b_img}, learn=False)[rid].x_hat
        return tuple(split(x_hat, [width, width]))

    def vec(img) -> SparseBitVector:
        return SparseBitVector.from_mask(img[0])

    rows, fwd, back, recalled = [], [], [], []
    for i, (a, b) in enumerate(zip(A, B)):
        got_b = recall(a, blank)[1]
        got_a = recall(blank, b)[0]
        recalled.append(got_b)
        fwd.append(jaccard(got_b, vec(b)))
        back.append(jaccard(got_a, vec(a)))
        rows.append([i, f"{fwd[-1]:.6g}", f"{back[-1]:.6g}"])
    controls = []
    for _ in range(n):
        fresh_a, fresh_b = _pattern(rng, width, active), _pattern(rng, width, active)
        got_b = recall(fresh_a, blank)[1]
        controls.append(jaccard(got_b, vec(fresh_b)))
    o.table("metrics.csv", ["pair", "recall_b_from_a", "recall_a_from_b"], rows)
    cross = np.array([[jaccard(r, vec(b)) for b in B] for r in recalled])
    o.matrix("recall_similarity", cross)
    ck = cfg["checks"]
    report.values.update(recall_b_from_a=float(np.mean(fwd)), recall_a_from_b=float(np.mean(back)),
                         control=float(np.mean(controls)))
    report.checks["a alone recalls b"] = np.mean(fwd) >= ck["recall_min"]
    report.checks["b alone recalls a"] = np.mean(back) >= ck["recall_min"]
    report.checks["untrained input recalls nothing specific"] = np.mean(controls) <= ck["control_max"]
    o.snapshot(net)
    return o.finish(t0)


# -- forgetting ----------------------------------------------------------------

def _sequence_accuracy(net: Network, seq: list[int], repeats: int, rows: list[MetricsRow] | None = None) -> float:
    """Fraction of correct next-element predictions, skipping the first pass (context warm-up)."""
    rid = _region_ids(net)[0]
    name = net.spec.sensors[0].name
    net.reset()
    ok = total = 0
    for rep in range(repeats):
        for i, v in enumerate(seq):
            out = net.tick({name: v}, learn=False)[rid]
            pred = out.predictions[0] if out.z.cardinality else None
            if rows is not None:
                rows.append(MetricsRow(net.tick_count, {name: v, "phase": 2}, {name: pred}, {}, None,
                                       pred is not None))
            if rep >= 1:
                total += 1
                ok += pred == seq[(i + 1) % len(seq)]
    net.reset()
    return ok / total


def _train(net: Network, seq: list[int], reps: int, phase: int, rows: list[MetricsRow]) -> None:
    rid = _region_ids(net)[0]
    name = net.spec.sensors[0].name
    for _ in range(reps):
        for v in seq:
            out = net.tick({name: v})[rid]
            pred = out.predictions[0] if out.z.cardinality else None
            rows.append(MetricsRow(net.tick_count, {name: v, "phase": phase}, {name: pred}, {}, None,
                                   pred is not None))
    net.reset()


def forgetting_protocol(cfg: Mapping[str, Any], meta: bool) -> tuple[Network, dict[str, float], list[MetricsRow]]:
    regions = [deep_merge(r, {"sequence_memory": {"meta": meta}}) for r in cfg["topology"]["regions"]]
    net = build_network(cfg, {"regions": regions})
    s1, s2 = [int(v) for v in cfg["sequence_1"]], [int(v) for v in cfg["sequence_2"]]
    reps = int(cfg["test_repeats"])
    rows: list[MetricsRow] = []
    _train(net, s1, int(cfg["first_block"]), 0, rows)
    for _ in range(int(cfg["cycles"])):
        _train(net, s2, int(cfg["block"]), 1, rows)
        _train(net, s1, int(cfg["block"]), 0, rows)
    pre = _sequence_accuracy(net, s1, reps, rows)
    _train(net, s2, int(cfg["final_block"]), 1, rows)
    post = _sequence_accuracy(net, s1, reps, rows)
    other = _sequence_accuracy(net, s2, reps, rows)
    return net, {"pre": pre, "post": post, "sequence_2": other}, rows


def run_forgetting(cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    """Sequence 1 accuracy before and after training sequence 2, with and without meta-plasticity."""
    t0 = time.perf_counter()
    report = Report("forgetting", int(cfg["seed"]))
    o = _Output(out, report)
    net_on, on, rows_on = forgetting_protocol(cfg, True)
    net_off, off, rows_off = forgetting_protocol(cfg, False)
    o.metrics(rows_on, "metrics.csv")
    o.metrics(rows_off, "metrics_without_meta.csv")
    o.matrix("accuracy", np.array([[on["pre"], on["post"], on["sequence_2"]],
                                   [off["pre"], off["post"], off["sequence_2"]]]))
    report.values.update({f"meta_{k}": v for k, v in on.items()})
    report.values.update({f"plain_{k}": v for k, v in off.items()})
    retain = cfg["checks"]["retain_min"]
    report.checks["sequence 1 learned before interference"] = on["pre"] >= retain and off["pre"] >= retain
    report.checks["meta-plasticity retains sequence 1"] = on["post"] >= retain * on["pre"]
    report.checks["without meta-plasticity sequence 1 degrades"] = off["post"] < off["pre"]
    o.snapshot(net_on)
    o.snapshot(net_off, "snapshot_without_meta.zip")
    return o.finish(t0)


RUNNERS: dict[str, Callable[[Mapping[str, Any], str | Path | None], Report]] = {
    "reconstruction": run_reconstruction,
    "lissajous": run_lissajous,
    "popeq": run_popeq,
    "persistence": run_persistence,
    "shapes": run_shapes,
    "association": run_association,
    "forgetting": run_forgetting,
}


def run(name: str, cfg: Mapping[str, Any], out: str | Path | None = None) -> Report:
    if name not in RUNNERS:
        raise KeyError(f"unknown experiment {name!r}")
    return RUNNERS[name](cfg, out)
