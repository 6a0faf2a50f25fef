"""Independent numpy oracle for the frozen constants in the core test suite.

Run with `python3 oracle.py`; every printed value is pasted verbatim into the
Rust tests that reference it.
"""
import itertools
import math

import numpy as np
from scipy.optimize import brentq


def H(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def circulant(delta, y_card=8, block=2):
    x_card = y_card * block
    t = np.zeros((y_card, x_card))
    for y in range(y_card):
        for b in range(block):
            t[y, y * block + b] = (1 - 2 * delta) / block
            t[y, ((y - 1) % y_card) * block + b] = 2 * delta / block
    return t


def dataset_joint(delta):
    t = circulant(delta)
    return np.einsum("y,ya,yb->ab", np.full(8, 1 / 8), t, t)


def mi2(j):
    return H(j.sum(1)) + H(j.sum(0)) - H(j)


bits = 1 / math.log(2)
print("entropy [.4,.4,.1,.1] bits", repr(H([0.4, 0.4, 0.1, 0.1]) * bits))
print("H(Xi|Y) delta=0.1 bits", repr(sum(H(r) for r in circulant(0.1)) / 8 * bits))
print("I(X1;X2) delta=0 bits", repr(mi2(dataset_joint(0.0)) * bits))
print("I(X1;X2) delta=0.1 bits", repr(mi2(dataset_joint(0.1)) * bits))
print("KL(u2 || [.75,.25]) nats", repr(0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)))

# Clip, then find the shift s with sum exp(-clip(c+s, lo, hi)) = 1.
lo, hi = np.finfo(float).eps, 30.0
v = np.clip(np.array([-5.0, 1.0, 2.0, 3.0]), lo, hi)
f = lambda s: np.exp(-np.clip(v + s, lo, hi)).sum() - 1.0
s = brentq(f, lo - v.max() - 1, hi - v.min() + 1, xtol=1e-15)
print("project [-5,1,2,3] ->", [repr(float(x)) for x in np.clip(v + s, lo, hi)])
w = np.array([0.1, 2.0, 29.99])
v = np.clip(w, lo, hi)
s = brentq(f, lo - v.max() - 1, hi - v.min() + 1, xtol=1e-15)
print("project [0.1,2,29.99] ->", [repr(float(x)) for x in np.clip(v + s, lo, hi)])

print("sigma entropy eps0=1", repr(2 * math.exp(-1) * 1))
print("sigma entropy eps0=0.5", repr(2 * math.exp(-0.5) * 1.5))
print("sigma negentropy", repr(2 * math.exp(-3)))

# Deterministic partition encoder z = x1 // 2 on the noise-free joint.
j = dataset_joint(0.0)
full = np.zeros((16, 16, 8))
for a, b in itertools.product(range(16), range(16)):
    full[a, b, a // 2] = j[a, b]
hz = H(full.sum((0, 1)))
h_z_x = H(full) - H(j)
h_z_x1 = H(full.sum(1)) - H(j.sum(1))
h_z_x2 = H(full.sum(0)) - H(j.sum(0))
for g in (0.0, 1.0, 5.0):
    lag = (1 - g) * hz - (1 + g) * h_z_x + g * h_z_x1 + g * h_z_x2
    print(f"lagrangian_gamma partition gamma={g} nats", repr(lag))
print("partition plane bits", repr((hz - h_z_x1 + hz - h_z_x2) * bits), repr((hz - h_z_x) * bits))

# Bayes-posterior encoder on delta = 0.1: expected stochastic-draw accuracy.
t = circulant(0.1)
post = np.einsum("y,ya,yb->aby", np.full(8, 1 / 8), t, t)
pj = post.sum(2)
acc = sum((post[a, b] ** 2).sum() / pj[a, b] for a in range(16) for b in range(16) if pj[a, b] > 0)
print("posterior encoder expected accuracy delta=0.1", repr(acc))

# Threshold from clipping bound, noise-free joint, gamma = 1.
pmax = j.max()
m = lo
for g in (1.0, 50.0):
    sig_f = (1 + g) * pmax * 2 * math.exp(-3)
    l_p = (1 + g) * pmax * math.exp(-m) * (2 - m)
    sig_h = 2 * math.exp(-m) * (2 - m)
    sig_g = pmax * (max(1 - g, 0) * sig_h + max(g - 1, 0) * 2 * math.exp(-3) + 2 * g * sig_h)
    delta = math.sqrt(sig_f ** 2 + 8 * l_p ** 2)
    print(f"threshold gamma={g}", repr(max(sig_g, (sig_f + delta) / 2)))
