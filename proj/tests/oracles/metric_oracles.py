#!/usr/bin/env python3
"""Independent reference values for the weighted F-beta and structure measure.

Recomputes both scores from scratch (scipy distance transform, explicit
Gaussian window, fresh transcription of the published evaluation semantics)
on small deterministic instances, and prints the expected values that
tests/test_metrics.cpp hard-codes. Inputs are built from integer patterns so
the C++ side constructs bit-identical doubles.

Run: python3 tests/oracles/metric_oracles.py
"""

import numpy as np
from scipy import ndimage

EPS = np.finfo(np.float64).eps


def check_tie_safe(pred, gt):
    """Assert distance-transform ties cannot change the score: every background
    pixel's set of nearest foreground pixels must carry a single error value."""
    H, W = gt.shape
    sites = np.argwhere(gt)
    assert len(sites) > 0
    e = np.abs(pred - gt.astype(np.float64))
    for y in range(H):
        for x in range(W):
            if gt[y, x]:
                continue
            d2 = (sites[:, 0] - y) ** 2 + (sites[:, 1] - x) ** 2
            nearest = sites[d2 == d2.min()]
            vals = {e[r, c] for r, c in nearest}
            assert len(vals) == 1, f"ambiguous tie at ({y},{x})"


def gaussian7(sigma=5.0):
    ax = np.arange(-3, 4, dtype=np.float64)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma * sigma))
    return k / k.sum()


def wfb(pred, gt):
    gt = gt.astype(bool)
    if not gt.any():
        return 1.0 - pred.mean()
    d = gt.astype(np.float64)
    e = np.abs(pred - d)
    dst, idx = ndimage.distance_transform_edt(~gt, return_indices=True)
    et = e.copy()
    bg = ~gt
    et[bg] = e[idx[0][bg], idx[1][bg]]
    ea = ndimage.correlate(et, gaussian7(), mode="constant", cval=0.0)
    min_e_ea = e.copy()
    sel = gt & (ea < e)
    min_e_ea[sel] = ea[sel]
    b = np.ones_like(d)
    b[bg] = 2 - np.exp(np.log(0.5) / 5.0 * dst[bg])
    ew = min_e_ea * b
    tpw = d.sum() - ew[gt].sum()
    fpw = ew[bg].sum()
    r = 1 - ew[gt].mean()
    p = tpw / (EPS + tpw + fpw)
    return 2 * r * p / (EPS + r + p)


def s_object_half(vals):
    x = vals.mean()
    sx = vals.std(ddof=1) if vals.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sx + EPS)


def region_ssim(p, g):
    n = p.size
    x, y = p.mean(), g.mean()
    denom = n - 1 + EPS
    vx = ((p - x) ** 2).sum() / denom
    vy = ((g - y) ** 2).sum() / denom
    vxy = ((p - x) * (g - y)).sum() / denom
    a = 4 * x * y * vxy
    b = (x * x + y * y) * (vx + vy)
    if a != 0:
        return a / (b + EPS)
    return 1.0 if b == 0 else 0.0


def smeasure(pred, gt):
    gt = gt.astype(bool)
    y = gt.mean()
    if y == 0:
        return 1.0 - pred.mean()
    if y == 1:
        return pred.mean()
    # object half
    u = gt.mean()
    o = u * s_object_half(pred[gt]) + (1 - u) * s_object_half(1.0 - pred[~gt])
    # region half: centroid in 1-based coords, round half up
    H, W = gt.shape
    total = gt.sum()
    X = int(np.floor((gt.sum(0) * np.arange(1, W + 1)).sum() / total + 0.5))
    Y = int(np.floor((gt.sum(1) * np.arange(1, H + 1)).sum() / total + 0.5))
    area = float(H * W)
    blocks = [
        ((slice(0, Y), slice(0, X)), X * Y / area),
        ((slice(0, Y), slice(X, W)), (W - X) * Y / area),
        ((slice(Y, H), slice(0, X)), X * (H - Y) / area),
    ]
    blocks.append(((slice(Y, H), slice(X, W)), 1.0 - sum(w for _, w in blocks)))
    r = 0.0
    g = gt.astype(np.float64)
    for (sl, w) in blocks:
        if w > 0:
            r += w * region_ssim(pred[sl], g[sl])
    q = 0.5 * o + 0.5 * r
    return max(q, 0.0)


def pattern_pred(H, W):
    p = np.empty((H, W), dtype=np.float64)
    for yy in range(H):
        for xx in range(W):
            p[yy, xx] = 0.25 + ((yy * 7 + xx * 3) % 11) / 20.0
    return p


def instance_a():
    gt = np.zeros((9, 9), dtype=bool)
    gt[2:6, 3:7] = True
    return pattern_pred(9, 9), gt


def instance_b():
    # Two components; prediction is constant on the foreground so nearest-site
    # ties (inevitable between components) cannot influence the result.
    gt = np.zeros((9, 9), dtype=bool)
    gt[2, 2] = True
    gt[5:7, 5:7] = True
    pred = pattern_pred(9, 9)
    pred[gt] = 0.85
    return pred, gt


def instance_c():
    gt = np.zeros((7, 5), dtype=bool)
    gt[1:6, 1] = True
    gt[5, 1:4] = True
    pred = pattern_pred(7, 5)
    pred[gt] = 0.85
    return pred, gt


for name, (pred, gt) in [("A", instance_a()), ("B", instance_b()), ("C", instance_c())]:
    check_tie_safe(pred, gt)
    print(f"{name}: wfb      = {wfb(pred, gt):.17g}")
    print(f"{name}: smeasure = {smeasure(pred, gt):.17g}")
