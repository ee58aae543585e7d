"""Saving a network mid-run and carrying on from the file.

A snapshot holds synapses, buffers, pooling windows and random generator
states, so a restored network continues exactly as the original would have.
"""
import io

from cal.experiments.config import load_config
from cal.experiments.generators import popeq_series
from cal.experiments.runners import build_network
from cal.network import restore, snapshot

cfg = load_config("popeq")
series = popeq_series(600, cfg["s0"], cfg["beta"])


def predictions(net, values):
    return [net.tick({"s": s})["R1"].predictions[0] for s in values]


straight = build_network(cfg)
expected = predictions(straight, series)

net = build_network(cfg)
head = predictions(net, series[:250])
buf = io.BytesIO()
snapshot(net, buf)
print(f"snapshot after {net.tick_count} ticks: {buf.tell() / 1024:.0f} KiB")
buf.seek(0)
resumed = restore(buf)
tail = predictions(resumed, series[250:])
print("resumed run matches the uninterrupted one:", head + tail == expected)
