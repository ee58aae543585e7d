"""Hierarchy of regions: topology, per-tick scheduling and snapshots.

Topology files are YAML documents::

    name: stack
    seed: 1
    sensors:
      - {name: s, kind: real, min: 0.0, max: 1.0, resolution: 0.005, k: 5}
    regions:
      - id: R1
        level: 1
        columns: 1024
        cells: 8
        segments: 4
        pool_window: 1
        correlator: {mode: hardwired, fanin: 2}
    feedforward:
      - [s, R1]
    feedback: []

Feed-forward edges go from sensors to level-1 regions or from a region to a
region exactly one level up; their order fixes the concatenation order of a
region's input.  Feedback edges go from a region to any lower level and carry
the source's active columns.  Every edge delays its payload by one tick.
"""
from __future__ import annotations

import io
import json
import zipfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .bitvec import SparseBitVector, concat
from .codec import EncoderSpec, encode, ingest_frame, make_encoder
from .region import ApicalConfig, CorrelatorConfig, Region, RegionConfig, RegionOutput, SMConfig
from .sequence_memory import SMGeometry
from .synapses import PlasticityParams, SynapseArray

__all__ = [
    "TopologyError",
    "SnapshotError",
    "SensorSpec",
    "RegionSpec",
    "TopologySpec",
    "Network",
    "build",
    "load_topology",
    "snapshot",
    "restore",
]

SNAPSHOT_FORMAT = "cal-network-snapshot"
SNAPSHOT_VERSION = 1
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


class TopologyError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


@dataclass
class SensorSpec:
    name: str
    kind: str
    encoder: EncoderSpec | None = None
    shape: tuple[int, int] | None = None
    k: int | None = None  # image sensors: active bits kept when reconstructing

    def __post_init__(self):
        if self.kind in ("real", "integer"):
            if self.encoder is None:
                raise TopologyError(f"sensor {self.name}: scalar sensors need an encoder")
        elif self.kind == "image":
            if self.shape is None:
                raise TopologyError(f"sensor {self.name}: image sensors need a shape")
        else:
            raise TopologyError(f"sensor {self.name}: unknown kind {self.kind!r}")

    @property
    def width(self) -> int:
        return self.encoder.N if self.encoder is not None else self.shape[0] * self.shape[1]

    def to_vector(self, value: Any) -> SparseBitVector:
        if self.encoder is not None:
            return encode(self.encoder, value)
        if isinstance(value, SparseBitVector):
            if value.length != self.width:
                raise ValueError(f"sensor {self.name}: vector length {value.length} != {self.width}")
            return value
        image = np.asarray(value)
        if image.shape != tuple(self.shape):
            raise ValueError(f"sensor {self.name}: image shape {image.shape} != {self.shape}")
        return ingest_frame(image)


@dataclass
class RegionSpec:
    id: str
    level: int
    config: RegionConfig


@dataclass
class TopologySpec:
    regions: list[RegionSpec]
    ff_edges: list[tuple[str, str]]
    fb_edges: list[tuple[str, str]] = field(default_factory=list)
    sensors: list[SensorSpec] = field(default_factory=list)
    seed: int = 0
    name: str = "network"

    def region(self, rid: str) -> RegionSpec:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def sensor(self, name: str) -> SensorSpec:
        for s in self.sensors:
            if s.name == name:
                return s
        raise KeyError(name)

    def ff_sources(self, rid: str) -> list[str]:
        return [src for src, dst in self.ff_edges if dst == rid]

    def fb_sources(self, rid: str) -> list[str]:
        return [src for src, dst in self.fb_edges if dst == rid]

    def levels(self) -> list[list[str]]:
        top = max(r.level for r in self.regions)
        return [[r.id for r in self.regions if r.level == lv] for lv in range(1, top + 1)]

    def validate(self) -> None:
        ids = [r.id for r in self.regions]
        names = [s.name for s in self.sensors]
        if len(set(ids)) != len(ids) or len(set(names)) != len(names) or set(ids) & set(names):
            raise TopologyError("region ids and sensor names must be unique")
        level = {r.id: r.level for r in self.regions}
        for r in self.regions:
            if r.level < 1:
                raise TopologyError(f"region {r.id}: levels start at 1")
        for src, dst in self.ff_edges:
            if dst not in level:
                raise TopologyError(f"feed-forward edge to unknown region {dst!r}")
            if src in names:
                if level[dst] != 1:
                    raise TopologyError(f"sensor {src} must feed a level-1 region, not {dst}")
            elif src in level:
                if level[dst] != level[src] + 1:
                    raise TopologyError(f"feed-forward edge {src}->{dst} must climb exactly one level")
            else:
                raise TopologyError(f"feed-forward edge from unknown source {src!r}")
        for src, dst in self.fb_edges:
            if src not in level or dst not in level:
                raise TopologyError(f"feedback edge {src}->{dst} names an unknown region")
            if level[dst] >= level[src]:
                raise TopologyError(f"feedback edge {src}->{dst} must descend")
        _check_acyclic(ids, self.ff_edges)
        for r in self.regions:
            srcs = self.ff_sources(r.id)
            if not srcs:
                raise TopologyError(f"region {r.id} has no feed-forward input")
            width = sum(self.sensor(s).width if s in names else self.region(s).config.geometry.cells for s in srcs)
            if width != r.config.input_width:
                raise TopologyError(f"region {r.id}: input width {r.config.input_width} != sources' {width}")
            fb = sum(self.region(s).config.geometry.n_col for s in self.fb_sources(r.id))
            if fb != r.config.feedback_width:
                raise TopologyError(f"region {r.id}: feedback width {r.config.feedback_width} != sources' {fb}")

    # -- (de)serialization -------------------------------------------------
    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "TopologySpec":
        try:
            sensors = [_sensor_from_dict(s) for s in doc.get("sensors", [])]
            ff = [tuple(e) for e in doc["feedforward"]]
            fb = [tuple(e) for e in doc.get("feedback", []) or []]
            seed = int(doc.get("seed", 0))
            width_of = {s.name: s.width for s in sensors}
            chan_of = {s.name: (s.width, s.encoder.k if s.encoder is not None else s.k)
                       for s in sensors if s.encoder is not None or s.k}
            raw = sorted(doc["regions"], key=lambda r: int(r["level"]))
            regions: list[RegionSpec] = []
            for index, r in enumerate(raw):
                rid = str(r["id"])
                geom = SMGeometry(int(r["columns"]), int(r.get("cells", 1)), int(r.get("segments", 1)))
                srcs = [s for s, d in ff if d == rid]
                missing = [s for s in srcs if s not in width_of]
                if missing:
                    raise TopologyError(f"region {rid}: sources {missing} must be listed before it")
                width = int(r.get("input_width", sum(width_of[s] for s in srcs)))
                fb_width = sum(int(next(x for x in raw if str(x["id"]) == s)["columns"])
                               for s, d in fb if d == rid)
                channels = [chan_of[s] for s in srcs] if srcs and all(s in chan_of for s in srcs) else []
                cfg = RegionConfig(
                    geometry=geom,
                    input_width=width,
                    pool_window=int(r.get("pool_window", 1)),
                    correlator=_correlator_from_dict(r.get("correlator", {}), r.get("k")),
                    sequence_memory=_sm_from_dict(r.get("sequence_memory", {})),
                    feedback_width=int(r.get("feedback_width", fb_width)),
                    apical=_apical_from_dict(r.get("apical", {})),
                    channels=channels,
                    seed=int(r["seed"]) if "seed" in r else _derive_seed(seed, index),
                )
                regions.append(RegionSpec(rid, int(r["level"]), cfg))
                width_of[rid] = geom.cells
        except (KeyError, TypeError, StopIteration) as exc:
            raise TopologyError(f"malformed topology: {exc!r}") from exc
        spec = cls(regions, ff, fb, sensors, seed, str(doc.get("name", "network")))
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "sensors": [_sensor_to_dict(s) for s in self.sensors],
            "regions": [_region_to_dict(r) for r in self.regions],
            "feedforward": [list(e) for e in self.ff_edges],
            "feedback": [list(e) for e in self.fb_edges],
        }


def _derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint32)[0])


def _check_acyclic(ids: Sequence[str], edges: Sequence[tuple[str, str]]) -> None:
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for s, d in edges:
        if s in succ:
            succ[s].append(d)
    state: dict[str, int] = {}

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in succ.get(node, []):
            if state.get(nxt) == 1:
                raise TopologyError(f"feed-forward cycle through {nxt}")
            if nxt not in state:
                visit(nxt)
        state[node] = 2

    for i in ids:
        if i not in state:
            visit(i)


_PLASTIC_KEYS = ("delta_AA", "delta_AI", "delta_IA", "balance", "meta")


def _plasticity(d: Mapping[str, Any], default: PlasticityParams) -> PlasticityParams:
    kw = {k: d[k] for k in _PLASTIC_KEYS if k in d}
    base = {k: getattr(default, k) for k in _PLASTIC_KEYS}
    base.update(kw)
    return PlasticityParams(**base)


def _plasticity_dict(p: PlasticityParams) -> dict[str, Any]:
    return {k: getattr(p, k) for k in _PLASTIC_KEYS}


def _bits(v: Any) -> int | None:
    return None if v in (None, "full") else int(v)


def _correlator_from_dict(d: Mapping[str, Any], k: Any) -> CorrelatorConfig:
    base = CorrelatorConfig()
    return CorrelatorConfig(
        mode=d.get("mode", base.mode),
        fanin=int(d.get("fanin", base.fanin)),
        weight_bits=_bits(d.get("weight_bits", base.weight_bits)),
        k=None if k is None else int(k),
        plasticity=_plasticity(d, base.plasticity),
        init_p=d.get("init_p"),
    )


def _sm_from_dict(d: Mapping[str, Any]) -> SMConfig:
    base = SMConfig()
    return SMConfig(
        enabled=bool(d.get("enabled", True)),
        weight_bits=_bits(d.get("weight_bits", base.weight_bits)),
        plasticity=_plasticity(d, base.plasticity),
        sample=d.get("sample"),
        init_p=d.get("init_p"),
    )


def _apical_from_dict(d: Mapping[str, Any]) -> ApicalConfig:
    base = ApicalConfig()
    return ApicalConfig(
        weight_bits=_bits(d.get("weight_bits", base.weight_bits)),
        plasticity=_plasticity(d, base.plasticity),
        learning=bool(d.get("learning", True)),
    )


def _sensor_from_dict(d: Mapping[str, Any]) -> SensorSpec:
    kind = d["kind"]
    if kind == "image":
        k = d.get("k")
        return SensorSpec(str(d["name"]), kind, shape=(int(d["rows"]), int(d["cols"])),
                          k=None if k is None else int(k))
    enc = make_encoder(d["min"], d["max"], d.get("resolution", 1), int(d["k"]), kind, d.get("d"))
    return SensorSpec(str(d["name"]), kind, encoder=enc)


def _sensor_to_dict(s: SensorSpec) -> dict[str, Any]:
    if s.kind == "image":
        return {"name": s.name, "kind": "image", "rows": s.shape[0], "cols": s.shape[1], "k": s.k}
    e = s.encoder
    return {"name": s.name, "kind": s.kind, "min": e.s_min, "max": e.s_max, "resolution": e.r, "k": e.k, "d": e.d}


def _region_to_dict(r: RegionSpec) -> dict[str, Any]:
    c = r.config
    cc, smc, ap = c.correlator, c.sequence_memory, c.apical
    return {
        "id": r.id,
        "level": r.level,
        "columns": c.geometry.n_col,
        "cells": c.geometry.n_cell,
        "segments": c.geometry.n_seg,
        "k": c.k_out,
        "input_width": c.input_width,
        "feedback_width": c.feedback_width,
        "pool_window": c.pool_window,
        "seed": c.seed,
        "correlator": {"mode": cc.mode, "fanin": cc.fanin, "weight_bits": cc.weight_bits, "init_p": cc.init_p,
                       **_plasticity_dict(cc.plasticity)},
        "sequence_memory": {"enabled": smc.enabled, "weight_bits": smc.weight_bits, "sample": smc.sample,
                            "init_p": smc.init_p, **_plasticity_dict(smc.plasticity)},
        "apical": {"weight_bits": ap.weight_bits, "learning": ap.learning, **_plasticity_dict(ap.plasticity)},
    }


def load_topology(path: str | Path) -> TopologySpec:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise TopologyError(f"{path}: expected a mapping at top level")
    return TopologySpec.from_dict(doc)


class Network:
    """Running hierarchy; use :func:`build` to construct one."""

    def __init__(self, spec: TopologySpec, workers: int = 1):
        spec.validate()
        self.spec = spec
        self.workers = workers
        self.regions: dict[str, Region] = {}
        for r in spec.regions:
            encs = [spec.sensor(s).encoder for s in spec.ff_sources(r.id)] if r.config.channels else []
            if any(e is None for e in encs):
                encs = []
            self.regions[r.id] = Region(r.config, r.id, encs)
        self._levels = spec.levels()
        self.ff_buffer: dict[tuple[str, str], SparseBitVector] = {}
        self.fb_buffer: dict[tuple[str, str], SparseBitVector] = {}
        self.tick_count = 0
        # free-form JSON-serializable state kept by whoever drives the network
        self.extra: dict[str, Any] = {}
        self.reset_buffers()

    def reset_buffers(self) -> None:
        for src, dst in self.spec.ff_edges:
            if src in self.regions:
                self.ff_buffer[(src, dst)] = SparseBitVector.empty(self.regions[src].cells)
        for src, dst in self.spec.fb_edges:
            self.fb_buffer[(src, dst)] = SparseBitVector.empty(self.regions[src].config.geometry.n_col)

    def reset(self) -> None:
        """Clear all short-term state (buffers, pools, recurrent context)."""
        for region in self.regions.values():
            region.reset()
        self.reset_buffers()

    def tick(self, sensor_values: Mapping[str, Any] | Sequence[Any], learn: bool = True) -> dict[str, RegionOutput]:
        """Advance the whole hierarchy one time-step."""
        spec = self.spec
        if not isinstance(sensor_values, Mapping):
            if len(sensor_values) != len(spec.sensors):
                raise ValueError(f"expected {len(spec.sensors)} sensor values, got {len(sensor_values)}")
            sensor_values = {s.name: v for s, v in zip(spec.sensors, sensor_values)}
        encoded = {}
        for s in spec.sensors:
            if s.name not in sensor_values:
                raise ValueError(f"missing value for sensor {s.name!r}")
            encoded[s.name] = s.to_vector(sensor_values[s.name])

        def run(rid: str) -> RegionOutput:
            ff = [encoded[s] if s in encoded else self.ff_buffer[(s, rid)] for s in spec.ff_sources(rid)]
            fbs = spec.fb_sources(rid)
            fb = None
            if fbs:
                vecs = [self.fb_buffer[(s, rid)] for s in fbs]
                fb = vecs[0] if len(vecs) == 1 else concat(vecs)
            return self.regions[rid].step(ff, fb, learn=learn)

        outputs: dict[str, RegionOutput] = {}
        for ids in self._levels:
            if self.workers > 1 and len(ids) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    results = list(pool.map(run, ids))
            else:
                results = [run(rid) for rid in ids]
            outputs.update(zip(ids, results))
        for src, dst in self.ff_buffer:
            self.ff_buffer[(src, dst)] = outputs[src].v
        for src, dst in self.fb_buffer:
            self.fb_buffer[(src, dst)] = outputs[src].y
        self.tick_count += 1
        return outputs


def build(spec: TopologySpec, workers: int = 1) -> Network:
    return Network(spec, workers)


# -- snapshots ---------------------------------------------------------------

def _vec(v: SparseBitVector | None) -> str | None:
    return None if v is None else str(v)


def _unvec(s: str | None) -> SparseBitVector | None:
    return None if s is None else SparseBitVector.parse(s)


def _put(zf: zipfile.ZipFile, name: str, data: bytes | str) -> None:
    # fixed entry timestamps keep snapshots byte-identical across runs
    info = zipfile.ZipInfo(name, date_time=_ZIP_TIME)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def snapshot(net: Network, sink: str | Path | io.BufferedIOBase) -> None:
    """Write every array, buffer and RNG state of ``net`` to a zip archive."""
    manifest = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "tick": net.tick_count,
        "topology": net.spec.to_dict(),
        "ff_buffer": [[s, d, _vec(v)] for (s, d), v in net.ff_buffer.items()],
        "fb_buffer": [[s, d, _vec(v)] for (s, d), v in net.fb_buffer.items()],
        "regions": {},
        "extra": net.extra,
    }
    with zipfile.ZipFile(sink, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for rid, region in net.regions.items():
            state = {
                "pool": [_vec(v) for v in region.pool],
                "y_prev": _vec(region.y_prev),
                "correlator_init_p": region.correlator.init_p,
            }
            _put(zf, f"regions/{rid}/correlator.syn", region.correlator.array.to_bytes())
            if region.apical is not None:
                _put(zf, f"regions/{rid}/apical.syn", region.apical.to_bytes())
            sm = region.sm
            if sm is not None:
                _put(zf, f"regions/{rid}/sm.syn", sm.W.to_bytes())
                _put(zf, f"regions/{rid}/sm_excitation.f64", sm.d_prev.astype("<f8").tobytes())
                state["sm"] = {
                    "z_prev": _vec(sm.z_prev),
                    "a_prev": _vec(sm.a_prev),
                    "w_prev": _vec(sm.w_prev),
                    "s_prev": _vec(sm.s_prev),
                    "started": sm.started,
                    "rng": sm.rng.bit_generator.state,
                }
            manifest["regions"][rid] = state
        _put(zf, "manifest.json", json.dumps(manifest, indent=1, sort_keys=True))


def restore(source: str | Path | io.BufferedIOBase, workers: int = 1) -> Network:
    """Rebuild a network written by :func:`snapshot`."""
    try:
        zf = zipfile.ZipFile(source)
    except (zipfile.BadZipFile, OSError) as exc:
        raise SnapshotError(f"unreadable snapshot: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except (KeyError, ValueError, zipfile.BadZipFile, zlib.error) as exc:
            raise SnapshotError("snapshot has no valid manifest") from exc
        if manifest.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError("not a network snapshot")
        if manifest.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {manifest.get('version')}")
        try:
            spec = TopologySpec.from_dict(manifest["topology"])
            net = Network(spec, workers)
            net.tick_count = int(manifest["tick"])
            net.extra = dict(manifest.get("extra", {}))
            for s, d, v in manifest["ff_buffer"]:
                net.ff_buffer[(s, d)] = _unvec(v)
            for s, d, v in manifest["fb_buffer"]:
                net.fb_buffer[(s, d)] = _unvec(v)
            for rid, state in manifest["regions"].items():
                region = net.regions[rid]
                region.correlator.array = _load_array(zf, f"regions/{rid}/correlator.syn", region.correlator.array)
                region.correlator.init_p = state["correlator_init_p"]
                if region.apical is not None:
                    region.apical = _load_array(zf, f"regions/{rid}/apical.syn", region.apical)
                region.pool.clear()
                region.pool.extend(_unvec(v) for v in state["pool"])
                region.y_prev = _unvec(state["y_prev"])
                sm = region.sm
                if sm is not None:
                    st = state["sm"]
                    sm.W = _load_array(zf, f"regions/{rid}/sm.syn", sm.W)
                    sm.d_prev = np.frombuffer(zf.read(f"regions/{rid}/sm_excitation.f64"), "<f8").copy()
                    if sm.d_prev.size != sm.geom.segments:
                        raise SnapshotError(f"region {rid}: excitation vector size mismatch")
                    sm.z_prev, sm.a_prev = _unvec(st["z_prev"]), _unvec(st["a_prev"])
                    sm.w_prev, sm.s_prev = _unvec(st["w_prev"]), _unvec(st["s_prev"])
                    sm.started = bool(st["started"])
                    sm.rng.bit_generator.state = st["rng"]
        except SnapshotError:
            raise
        except (KeyError, ValueError, TypeError, zipfile.BadZipFile, zlib.error) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from exc
    return net


def _load_array(zf: zipfile.ZipFile, name: str, like: SynapseArray) -> SynapseArray:
    arr = SynapseArray.from_bytes(zf.read(name))
    if (arr.m, arr.n, arr.weight_bits) != (like.m, like.n, like.weight_bits):
        raise SnapshotError(f"{name}: geometry mismatch")
    return arr
