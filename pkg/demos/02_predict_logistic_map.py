"""Next-step prediction of a chaotic series with one region.

The logistic map s <- 3.89 s (1 - s) never repeats, but each value fully
determines the next.  Sequence memory learns which cells follow which, and the
predicted cells are decoded back into a scalar.  Watch the running RMS drop
as the transitions are learned.
"""
from cal.experiments.config import load_config
from cal.experiments.generators import popeq_series
from cal.experiments.metrics import RunningRMS
from cal.experiments.runners import build_network

cfg = load_config("popeq")
net = build_network(cfg)
series = popeq_series(3000, cfg["s0"], cfg["beta"])
rms = RunningRMS(50)
pred = None
for t, s in enumerate(series, start=1):
    r = rms.push(None if pred is None else pred - s)
    out = net.tick({"s": s})["R1"]
    pred = out.predictions[0] if out.z.cardinality else None
    if t in (10, 50, 100, 250, 500, 1000, 2000, 3000):
        print(f"iteration {t:5d}  value {s:.4f}  next guess {pred if pred is None else round(pred, 4)}"
              f"  rms50 {'-' if r is None else f'{r:.4f}'}")
