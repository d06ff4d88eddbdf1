"""Brute-force per-pixel reference implementations.

Everything here is written as plain scalar loops straight from the metric
definitions, independent of the library's vectorized code paths, so the two
can be compared on random instances.
"""

import math

import numpy as np


def l1_frame_loop(a, b):
    h, w, c = a.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            for k in range(c):
                total += abs(a[y, x, k] - b[y, x, k])
    return total / (h * w * c)


def bilinear_sample_loop(src, sx, sy):
    """Scalar bilinear lookup with zero outside the frame."""
    h, w = src.shape[:2]
    x0, y0 = math.floor(sx), math.floor(sy)
    out = np.zeros(src.shape[2], dtype=np.float64)
    for xx, yy, wgt in (
        (x0, y0, (1 - (sx - x0)) * (1 - (sy - y0))),
        (x0 + 1, y0, (sx - x0) * (1 - (sy - y0))),
        (x0, y0 + 1, (1 - (sx - x0)) * (sy - y0)),
        (x0 + 1, y0 + 1, (sx - x0) * (sy - y0)),
    ):
        if 0 <= xx < w and 0 <= yy < h:
            out += wgt * src[yy, xx]
    return out


def warp_loop(src, flow):
    h, w = src.shape[:2]
    out = np.zeros_like(src)
    for y in range(h):
        for x in range(w):
            out[y, x] = bilinear_sample_loop(
                src, x + flow[y, x, 0], y + flow[y, x, 1]
            )
    return out


def e_pair_loop(o_t, o_s, flow, mask):
    h, w = o_t.shape[:2]
    warped = warp_loop(o_s, flow)
    num = 0.0
    den = 0.0
    for y in range(h):
        for x in range(w):
            den += mask[y, x]
            num += mask[y, x] * np.sum(np.abs(o_t[y, x] - warped[y, x]))
    return num / den


def e_warp_loop(frames, flows_short, flows_long, masks_short, masks_long):
    t_count = len(frames)
    total = 0.0
    for k in range(t_count - 1):
        t = k + 1
        total += e_pair_loop(frames[t], frames[0], flows_long[k], masks_long[k])
        total += e_pair_loop(frames[t], frames[t - 1], flows_short[k], masks_short[k])
    return total / (t_count - 1)


def psnr_loop(a, b, cap=99.0):
    h, w, c = a.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            for k in range(c):
                total += (a[y, x, k] - b[y, x, k]) ** 2
    mse = total / (h * w * c)
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(1.0 / mse))


def f_data_loop(processed_frames, output_frames, cap=99.0):
    vals = [
        psnr_loop(p, o, cap)
        for p, o in zip(processed_frames[1:], output_frames[1:])
    ]
    return sum(vals) / len(vals)


def occlusion_loop(fwd, bwd, a, b):
    h, w = fwd.shape[:2]
    mask = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            sx = x + fwd[y, x, 0]
            sy = y + fwd[y, x, 1]
            if sx < 0 or sx > w - 1 or sy < 0 or sy > h - 1:
                continue
            bw_at = bilinear_sample_loop(bwd, sx, sy)
            du = fwd[y, x, 0] + bw_at[0]
            dv = fwd[y, x, 1] + bw_at[1]
            lhs = du * du + dv * dv
            mag = (
                fwd[y, x, 0] ** 2 + fwd[y, x, 1] ** 2
                + bw_at[0] ** 2 + bw_at[1] ** 2
            )
            if lhs <= a * mag + b:
                mask[y, x] = 1.0
    return mask


def confidence_loop(main, minor, processed, delta):
    h, w, c = main.shape
    conf = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            d_main = sum(abs(main[y, x, k] - processed[y, x, k]) for k in range(c)) / c
            d_minor = sum(abs(minor[y, x, k] - processed[y, x, k]) for k in range(c)) / c
            if d_main < max(d_minor, delta):
                conf[y, x] = 1.0
    return conf
