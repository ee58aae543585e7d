"""Cortical network simulator: sparse binary correlators, sequence memory and region hierarchies."""
from .bitvec import SparseBitVector, jaccard
from .codec import EncoderSpec, decode, encode, make_encoder
from .network import Network, TopologySpec, build, load_topology, restore, snapshot
from .region import Region, RegionConfig

__version__ = "0.1.0"

__all__ = [
    "SparseBitVector",
    "jaccard",
    "EncoderSpec",
    "make_encoder",
    "encode",
    "decode",
    "Region",
    "RegionConfig",
    "Network",
    "TopologySpec",
    "build",
    "load_topology",
    "snapshot",
    "restore",
]
