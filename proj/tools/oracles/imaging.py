"""Reference values for tests/test_imaging.cpp, computed with plain numpy loops."""
import numpy as np


def lcg_image(w, h, seed):
    state = seed
    out = np.empty((h, w, 3))
    for y in range(h):
        for x in range(w):
            for c in range(3):
                state = (state * 1103515245 + 12345) % (1 << 31)
                out[y, x, c] = state / float(1 << 31)
    return out


def dense_blur(img, sigma):
    r = int(np.ceil(3 * sigma))
    k = np.exp(-0.5 * np.arange(-r, r + 1) ** 2 / sigma**2)
    k /= k.sum()
    h, w, _ = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(3)
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += k[dy + r] * k[dx + r] * img[yy, xx]
            out[y, x] = acc
    return out


def naive_ssim(a, b):
    a = np.clip(a, 0, 1)
    b = np.clip(b, 0, 1)
    g = np.exp(-0.5 * (np.arange(11) - 5) ** 2 / 1.5**2)
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = 0.01**2, 0.03**2
    h, w, _ = a.shape
    total = 0.0
    for c in range(3):
        vals = []
        for y in range(h - 10):
            for x in range(w - 10):
                pa = a[y:y + 11, x:x + 11, c]
                pb = b[y:y + 11, x:x + 11, c]
                ma = (win * pa).sum()
                mb = (win * pb).sum()
                va = (win * (pa - ma) ** 2).sum()
                vb = (win * (pb - mb) ** 2).sum()
                cov = (win * (pa - ma) * (pb - mb)).sum()
                vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
        total += np.mean(vals)
    return total / 3


def main():
    imp = np.zeros((5, 5, 3))
    imp[2, 2] = 1.0
    blurred = dense_blur(imp, 1.0)
    print("impulse center", repr(blurred[2, 2, 0]), "corner", repr(blurred[0, 0, 0]), "edge", repr(blurred[2, 0, 0]))

    a = lcg_image(4, 4, 1)
    b = lcg_image(4, 4, 2)
    m = np.mean((a - b) ** 2)
    print("mse", repr(m), "psnr", repr(10 * np.log10(1 / m)))

    print("ssim 0 vs 1", repr(naive_ssim(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))))
    a = lcg_image(24, 20, 7)
    b = np.clip(a * 0.7 + 0.2 * lcg_image(24, 20, 8), 0, 1)
    print("ssim lcg", repr(naive_ssim(a, b)))

    s = lcg_image(6, 5, 3)
    print("saturation", repr(np.mean(s.max(axis=2) - s.min(axis=2))))

    t = lcg_image(16, 16, 11)
    print("blur16 s1.5 at (3,7)", repr(dense_blur(t, 1.5)[7, 3, 1]))


if __name__ == "__main__":
    main()
