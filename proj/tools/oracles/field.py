"""Reference values for tests/test_field.cpp."""
import math

import numpy as np


def adam_trace(p, grads, lr=1e-2, b1=0.9, b2=0.99, eps=1e-8):
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        p = p - lr * mh / (math.sqrt(vh) + eps)
        out.append(p)
    return out


def composite(samples, bg):
    t = 1.0
    col = np.zeros(3)
    for sigma, c, delta in samples:
        a = 1 - math.exp(-sigma * delta)
        col += t * a * np.asarray(c)
        t *= 1 - a
    return col + t * np.asarray(bg), 1 - t


if __name__ == "__main__":
    print("adam", [repr(x) for x in adam_trace(1.0, [0.5, -0.2, 0.1])])
    print("one sample", composite([(1.0, (1, 0, 0), 0.5)], (1, 1, 1)))
    print("three", composite([(0.4, (0.2, 0.5, 0.9), 0.3), (2.0, (0.7, 0.1, 0.3), 0.25), (0.8, (0.0, 0.9, 0.4), 0.6)], (1, 1, 1)))
