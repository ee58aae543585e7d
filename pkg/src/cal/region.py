"""One cortical region: correlator, sequence memory, apical array and pooling."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import correlator as bc
from .bitvec import SparseBitVector, concat, jaccard, split, union_window
from .codec import EncoderSpec, NoPrediction, decode
from .sequence_memory import SequenceMemory, SMGeometry, columns_of
from .synapses import PlasticityParams, SynapseArray, default_init_p, grow_synapses, update

__all__ = [
    "CorrelatorConfig",
    "SMConfig",
    "ApicalConfig",
    "RegionConfig",
    "RegionOutput",
    "Region",
    "apical_gain",
    "predict_scalar",
    "TRACE_FIELDS",
]

TRACE_FIELDS = ("tick", "region", "y", "v", "z", "persistence", "predictions")


@dataclass
class CorrelatorConfig:
    mode: str = "learning"
    fanin: int = 4
    weight_bits: int | None = None
    k: int | None = None
    plasticity: PlasticityParams = field(default_factory=PlasticityParams)
    init_p: float | None = None


@dataclass
class SMConfig:
    enabled: bool = True
    weight_bits: int | None = None
    plasticity: PlasticityParams = field(
        default_factory=lambda: PlasticityParams(delta_AA=0.1, delta_AI=0.1, delta_IA=0.02, balance=False))
    sample: int | None = None
    init_p: float | None = None


@dataclass
class ApicalConfig:
    weight_bits: int | None = None
    plasticity: PlasticityParams = field(default_factory=PlasticityParams)
    learning: bool = True


@dataclass
class RegionConfig:
    """Static description of a region.

    ``channels`` lists ``(width, k_in)`` per concatenated input channel and is
    only needed for reconstructing predicted input.
    """

    geometry: SMGeometry
    input_width: int
    pool_window: int = 1
    correlator: CorrelatorConfig = field(default_factory=CorrelatorConfig)
    sequence_memory: SMConfig = field(default_factory=SMConfig)
    feedback_width: int = 0
    apical: ApicalConfig = field(default_factory=ApicalConfig)
    channels: list[tuple[int, int]] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.pool_window < 1:
            raise ValueError("pool_window must be at least 1")
        if self.input_width < 1:
            raise ValueError("input_width must be positive")
        if self.channels and sum(w for w, _ in self.channels) != self.input_width:
            raise ValueError("channel widths must sum to input_width")

    @property
    def k_out(self) -> int:
        return self.correlator.k or bc.default_k(self.geometry.n_col)


@dataclass
class RegionOutput:
    y: SparseBitVector
    v: SparseBitVector
    z: SparseBitVector
    a: SparseBitVector
    x: SparseBitVector
    x_hat: SparseBitVector | None
    persistence: float
    predictions: list[float | None] = field(default_factory=list)


def apical_gain(f: SparseBitVector, W_ap: SynapseArray) -> np.ndarray:
    """Per-axon gain: unity baseline plus the feedback drive f^T W_ap."""
    if f.length != W_ap.m:
        raise ValueError(f"feedback length {f.length} != apical axon count {W_ap.m}")
    return 1.0 + W_ap.excite(f)


class Region:
    """Mutable state of one region; :meth:`step` advances it by one tick."""

    def __init__(self, config: RegionConfig, region_id: str = "R", encoders: Sequence[EncoderSpec] = ()):
        self.config = config
        self.id = region_id
        self.encoders = list(encoders)
        g = config.geometry
        cc = config.correlator
        rng = np.random.default_rng(config.seed)
        seeds = rng.integers(0, 2**63, size=3)
        if cc.mode == bc.HARDWIRED:
            self.correlator = bc.hardwire(config.input_width, g.n_col, cc.fanin, int(seeds[0]), config.k_out)
        else:
            self.correlator = bc.make_correlator(config.input_width, g.n_col, config.k_out, cc.weight_bits,
                                                 cc.plasticity)
            if cc.init_p is not None:
                self.correlator.init_p = cc.init_p
        smc = config.sequence_memory
        self.sm = SequenceMemory(g, config.k_out, smc.plasticity, smc.weight_bits, smc.init_p, smc.sample,
                                 int(seeds[1])) if smc.enabled else None
        self.apical = None
        if config.feedback_width:
            self.apical = SynapseArray(config.feedback_width, config.input_width, config.apical.weight_bits)
        self.pool: deque[SparseBitVector] = deque(maxlen=config.pool_window)
        self.y_prev: SparseBitVector | None = None

    @property
    def cells(self) -> int:
        return self.config.geometry.cells

    def reset(self) -> None:
        """Clear short-term context (pool, recurrent state); synapses stay."""
        self.pool.clear()
        self.y_prev = None
        if self.sm is not None:
            self.sm.reset()

    def step(self, ff_inputs: Sequence[SparseBitVector], feedback: SparseBitVector | None = None,
             learn: bool = True) -> RegionOutput:
        cfg = self.config
        x = concat(list(ff_inputs))
        if x.length != cfg.input_width:
            raise ValueError(f"region {self.id}: input width {x.length} != {cfg.input_width}")
        self.pool.append(x)
        pooled = union_window(list(self.pool))

        gain = None
        if self.apical is not None and feedback is not None:
            gain = apical_gain(feedback, self.apical)
        y = bc.forward(self.correlator, pooled, gain, learn=learn)
        if self.apical is not None and feedback is not None and learn and cfg.apical.learning:
            self._learn_apical(feedback, pooled, y)

        if self.sm is not None:
            v, z, a = self.sm.step(y, learn=learn)
        else:
            v = z = a = SparseBitVector.empty(cfg.geometry.cells)

        persistence = jaccard(y, self.y_prev) if self.y_prev is not None else 0.0
        self.y_prev = y

        x_hat = None
        predictions: list[float | None] = []
        if cfg.channels:
            # without sequence memory the region reconstructs its current input
            x_hat = self.reconstruct(z) if self.sm is not None else self._reconstruct_columns(y)
            if self.encoders:
                predictions = _decode_channels(self.encoders, [w for w, _ in cfg.channels], x_hat)
        return RegionOutput(y, v, z, a, pooled, x_hat, persistence, predictions)

    def _learn_apical(self, f: SparseBitVector, x: SparseBitVector, y: SparseBitVector) -> None:
        # gain slots that supported this step's winners: active inputs wired to a winning column
        arr = self.correlator.array
        ym = y.to_mask()
        xm = x.to_mask()
        sel = ym[arr.dend] & xm[arr.axon] & arr.connected()
        slots = SparseBitVector(np.unique(arr.axon[sel]), self.config.input_width)
        params = self.config.apical.plasticity
        update(self.apical, f, slots, params)
        grow_synapses(self.apical, f, slots, default_init_p(self.apical.weight_bits, params.delta_AA))

    def reconstruct(self, z: SparseBitVector) -> SparseBitVector:
        """Predicted input from predicted cells (per-channel top-k)."""
        return self._reconstruct_columns(columns_of(self.config.geometry, z))

    def _reconstruct_columns(self, cols: SparseBitVector) -> SparseBitVector:
        widths = [w for w, _ in self.config.channels]
        ks = [k for _, k in self.config.channels]
        return bc.reconstruct(self.correlator, cols, ks, widths)


def predict_scalar(region: Region, decoders: Sequence[EncoderSpec], z: SparseBitVector) -> list[float | None]:
    """Decode the region's prediction ``z`` into one value per channel (None = no prediction)."""
    if len(decoders) != len(region.config.channels):
        raise ValueError("one decoder per input channel required")
    if z.cardinality == 0:
        return [None] * len(decoders)
    return _decode_channels(decoders, [w for w, _ in region.config.channels], region.reconstruct(z))


def _decode_channels(decoders: Sequence[EncoderSpec], widths: list[int], x_hat: SparseBitVector) -> list[float | None]:
    out: list[float | None] = []
    for enc, part in zip(decoders, split(x_hat, widths)):
        try:
            out.append(decode(enc, part))
        except NoPrediction:
            out.append(None)
    return out
