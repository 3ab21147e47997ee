"""Independent scalar-loop oracles the library is checked against.

Everything here is written with plain Python loops and math, on purpose:
these implementations must not share code paths with the library.
"""

import math


def conv2d_ref(x, w, b=None, stride=1, padding="same"):
    """x: (N,H,W,Cin) nested-index ndarray; w: (kh,kw,Cin,Cout); zero padding."""
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    if padding == "same":
        ho = -(-h // stride)
        wo = -(-wd // stride)
        pt = max((ho - 1) * stride + kh - h, 0) // 2
        pl = max((wo - 1) * stride + kw - wd, 0) // 2
    else:
        ho = (h - kh) // stride + 1
        wo = (wd - kw) // stride + 1
        pt = pl = 0
    out = [[[[0.0] * cout for _ in range(wo)] for _ in range(ho)] for _ in range(n)]
    for ni in range(n):
        for yo in range(ho):
            for xo in range(wo):
                for co in range(cout):
                    acc = 0.0 if b is None else float(b[0, 0, 0, co])
                    for dy in range(kh):
                        for dx in range(kw):
                            yi = yo * stride + dy - pt
                            xi = xo * stride + dx - pl
                            if 0 <= yi < h and 0 <= xi < wd:
                                for ci in range(cin):
                                    acc += float(x[ni, yi, xi, ci]) * float(w[dy, dx, ci, co])
                    out[ni][yo][xo][co] = acc
    return out


def mae_ref(pred, target):
    total, count = 0.0, 0
    for a, b in zip(pred.reshape(-1).tolist(), target.reshape(-1).tolist()):
        total += math.fabs(a - b)
        count += 1
    return total / count


def gaussian_ref(size, sigma):
    half = (size - 1) / 2.0
    kern = [
        [math.exp(-((y - half) ** 2 + (x - half) ** 2) / (2.0 * sigma * sigma)) for x in range(size)]
        for y in range(size)
    ]
    s = sum(sum(row) for row in kern)
    return [[v / s for v in row] for row in kern]


def reflect_index(i, n):
    if n == 1:
        return 0
    period = 2 * n - 2
    i %= period
    return i if i < n else period - i


def blurred_gray_ref(img, weights, ksize, sigma):
    """img: (H, W, 3) array-like; grayscale then reflect-padded blur."""
    h, w = img.shape[0], img.shape[1]
    gray = [
        [sum(float(img[y, x, c]) * weights[c] for c in range(3)) for x in range(w)]
        for y in range(h)
    ]
    kern = gaussian_ref(ksize, sigma)
    p = ksize // 2
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(ksize):
                for dx in range(ksize):
                    acc += kern[dy][dx] * gray[reflect_index(y + dy - p, h)][reflect_index(x + dx - p, w)]
            out[y][x] = acc
    return out


def gray_ref(pred, target, weights, ksize, sigma):
    """pred/target: (1, H, W, 3); mean |blurred gray difference|."""
    bp = blurred_gray_ref(pred[0], weights, ksize, sigma)
    bt = blurred_gray_ref(target[0], weights, ksize, sigma)
    h, w = len(bp), len(bp[0])
    return sum(math.fabs(bp[y][x] - bt[y][x]) for y in range(h) for x in range(w)) / (h * w)


def dwt_ref(x):
    """Orthonormal Haar analysis of (1, H, W, C), channel groups [LL, LH, HL, HH]."""
    _, h, w, c = x.shape
    out = [[[[0.0] * (4 * c) for _ in range(w // 2)] for _ in range(h // 2)] for _ in range(1)]
    for y in range(h // 2):
        for xx in range(w // 2):
            for ci in range(c):
                a = float(x[0, 2 * y, 2 * xx, ci])
                b = float(x[0, 2 * y, 2 * xx + 1, ci])
                cc = float(x[0, 2 * y + 1, 2 * xx, ci])
                d = float(x[0, 2 * y + 1, 2 * xx + 1, ci])
                out[0][y][xx][ci] = (a + b + cc + d) / 2.0
                out[0][y][xx][c + ci] = (a + b - cc - d) / 2.0
                out[0][y][xx][2 * c + ci] = (a - b + cc - d) / 2.0
                out[0][y][xx][3 * c + ci] = (a - b - cc + d) / 2.0
    return out


def s2d_ref(x, r):
    """Space-to-depth of (1, H, W, C) under out[..., c*r*r + dy*r + dx]."""
    _, h, w, c = x.shape
    out = [[[[0.0] * (c * r * r) for _ in range(w // r)] for _ in range(h // r)] for _ in range(1)]
    for i in range(h // r):
        for j in range(w // r):
            for ci in range(c):
                for dy in range(r):
                    for dx in range(r):
                        out[0][i][j][ci * r * r + dy * r + dx] = float(x[0, i * r + dy, j * r + dx, ci])
    return out


def psnr_ref(pred, target, peak=1.0):
    se, count = 0.0, 0
    for a, b in zip(pred.reshape(-1).tolist(), target.reshape(-1).tolist()):
        se += (a - b) ** 2
        count += 1
    mse = se / count
    return math.inf if mse == 0.0 else 10.0 * math.log10(peak * peak / mse)


def adam_scalar_ref(w, g, lr, beta1, beta2, eps, steps=1):
    """Hand evaluation of the Adam recurrence on a single scalar."""
    m = v = 0.0
    for t in range(1, steps + 1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        w = w - lr * mhat / (math.sqrt(vhat) + eps)
    return w
