"""A three-level stack reading text, one character per tick.

Each level pools the verified cells of the level below over a longer window,
so higher levels see sequences of sequences and change more slowly.
Persistence is the Jaccard similarity of a region's output between
consecutive ticks.
"""
import numpy as np
import yaml

from cal.experiments.generators import SENTENCES
from cal.network import TopologySpec, build

TOPOLOGY = """
name: reader
seed: 1
sensors:
  - {name: c, kind: integer, min: 32, max: 122, k: 5}
regions:
  - {id: R1, level: 1, columns: 512, cells: 8, segments: 4}
  - {id: R2, level: 2, columns: 512, cells: 8, segments: 4, pool_window: 4}
  - {id: R3, level: 3, columns: 512, cells: 8, segments: 4, pool_window: 32}
feedforward: [[c, R1], [R1, R2], [R2, R3]]
"""

net = build(TopologySpec.from_dict(yaml.safe_load(TOPOLOGY)))
for rep in range(4):
    trace = {r: [] for r in net.regions}
    for sentence in SENTENCES:
        for ch in sentence:
            for rid, out in net.tick({"c": ord(ch)}).items():
                trace[rid].append(out.persistence)
    print(f"pass {rep + 1}: " + "  ".join(f"{r} {np.mean(p):.3f}" for r, p in trace.items()))
