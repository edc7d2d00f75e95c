"""Reference values for tests/test_diffusion.cpp."""
import numpy as np

from imaging import lcg_image

T = 1000
beta = np.concatenate([[0.0], np.linspace(1e-4, 2e-2, T)])
alpha_bar = np.cumprod(1 - beta)

if __name__ == "__main__":
    print("abar1", repr(alpha_bar[1]), "abar500", repr(alpha_bar[500]), "abarT", repr(alpha_bar[T]))
    t_half = int(np.argmin(np.abs(alpha_bar - 0.5)))
    print("closest to 0.5", t_half, repr(alpha_bar[t_half]))
    z = lcg_image(4, 4, 1)
    eps = lcg_image(4, 4, 2)
    a = alpha_bar[500]
    x0 = (z - np.sqrt(1 - a) * eps) / np.sqrt(a)
    print("x0[1,2,0]", repr(x0[1, 2, 0]), "x0[3,0,2]", repr(x0[3, 0, 2]))
