"""Encoding a scalar, pushing it through a correlator and reading it back.

A scalar becomes a run of k adjacent active bits.  A hardwired correlator maps
that to a handful of active columns; running the synapses backwards
reconstructs the input, and the decoder turns the reconstruction into a value
again.  For integers the round trip is exact.
"""
import numpy as np

from cal import correlator
from cal.codec import decode, encode, make_encoder

enc = make_encoder(0, 20, 1, 4, "integer")
x = encode(enc, 7)
print("encoder width", enc.N, "active bits for 7:", x.active.tolist())

corr = correlator.hardwire(enc.N, 256, 2, seed=0, k_out=16)
y = correlator.forward(corr, x)
print("active columns:", y.active.tolist())

x_hat = correlator.reconstruct(corr, y, enc.k)
print("reconstruction:", x_hat.active.tolist(), "-> decoded", decode(enc, x_hat))

# every value survives the round trip
def round_trip(v):
    return decode(enc, correlator.reconstruct(corr, correlator.forward(corr, encode(enc, v)), enc.k))


ok = all(round_trip(v) == v for v in range(21))
print("all 21 integers exact:", ok)

# a real-valued encoder can only be as good as its bin width
real = make_encoder(0.0, 1.0, 0.01, 5)
corr = correlator.hardwire(real.N, 1024, 2, seed=0, k_out=32)
rng = np.random.default_rng(0)
errs = []
for s in rng.uniform(0, 1, 2000):
    y = correlator.forward(corr, encode(real, s))
    errs.append(decode(real, correlator.reconstruct(corr, y, real.k)) - s)
print(f"real RMS {np.sqrt(np.mean(np.square(errs))):.5f} (bin width / sqrt(12) = {0.01 / np.sqrt(12):.5f})")
