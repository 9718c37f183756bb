#!/usr/bin/env python3
"""Generate data/bunny_slice.xyz: a 557-point planar outline of a rabbit-like
silhouette (body, head, two ears, tail, feet) with outward unit normals.

Units are meters; the shape is about 0.19 m tall. Points are equally spaced in
arclength and perturbed along the normal by Gaussian noise (sigma 0.25 mm).
The output is deterministic (fixed seed).
"""
import argparse

import numpy as np
from skimage import measure


def ellipse(x, y, cx, cy, rx, ry, rot_deg=0.0):
    t = np.deg2rad(rot_deg)
    dx, dy = x - cx, y - cy
    u = np.cos(t) * dx + np.sin(t) * dy
    v = -np.sin(t) * dx + np.cos(t) * dy
    return (np.hypot(u / rx, v / ry) - 1.0) * min(rx, ry)


def smin(a, b, k=0.006):
    h = np.clip(0.5 + 0.5 * (b - a) / k, 0.0, 1.0)
    return b * (1 - h) + a * h - k * h * (1 - h)


def shape(x, y):
    parts = [
        ellipse(x, y, 0.000, 0.045, 0.075, 0.050),        # body
        ellipse(x, y, 0.062, 0.098, 0.036, 0.030, 10),    # head
        ellipse(x, y, 0.040, 0.148, 0.012, 0.042, 20),    # back ear
        ellipse(x, y, 0.070, 0.146, 0.011, 0.038, -12),   # front ear
        ellipse(x, y, -0.078, 0.065, 0.016, 0.016),       # tail
        ellipse(x, y, 0.035, 0.002, 0.045, 0.012),        # feet
    ]
    f = parts[0]
    for p in parts[1:]:
        f = smin(f, p)
    return f


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/bunny_slice.xyz")
    ap.add_argument("--count", type=int, default=557)
    ap.add_argument("--noise", type=float, default=2.5e-4)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    lo, hi, n = np.array([-0.12, -0.04]), np.array([0.14, 0.22]), 2049
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys)
    F = shape(X, Y)
    contours = measure.find_contours(F, 0.0)
    c = max(contours, key=len)
    # (row, col) -> (x, y)
    pts = np.column_stack([np.interp(c[:, 1], np.arange(n), xs), np.interp(c[:, 0], np.arange(n), ys)])
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    closed = np.vstack([pts, pts[:1]])
    t = np.arange(args.count) * total / args.count
    px = np.interp(t, s, closed[:, 0])
    py = np.interp(t, s, closed[:, 1])

    eps = 1e-6
    gx = (shape(px + eps, py) - shape(px - eps, py)) / (2 * eps)
    gy = (shape(px, py + eps) - shape(px, py - eps)) / (2 * eps)
    g = np.hypot(gx, gy)
    nx, ny = gx / g, gy / g

    rng = np.random.default_rng(args.seed)
    d = rng.normal(0.0, args.noise, size=args.count)
    px, py = px + d * nx, py + d * ny

    with open(args.out, "w") as f:
        f.write("# dim 2\n")
        f.write(f"# rabbit-like planar outline, {args.count} points, perimeter {total:.6f} m\n")
        for a, b, u, v in zip(px, py, nx, ny):
            f.write(f"{a:.9f} {b:.9f} 0 {u:.9f} {v:.9f} 0\n")


if __name__ == "__main__":
    main()
