"""Generates the two-electrode mesh used by the electro-rheological demo.

Domain: (-1, 1)^2 minus the discs of radius 5/80 centred at (+-5/8, 0).
Force-based smoothing of a graded point cloud followed by Delaunay
triangulation. Output is the node/ele text format read by
`Triangulation::from_text`; markers are 1 (outer), 2 and 3 (electrodes),
0 (interior).

    python3 tools/er_mesh.py > crates/core/assets/er_mesh.txt
"""

import sys

import numpy as np
from scipy.spatial import Delaunay

C = 5.0 / 8.0
R = 5.0 / 80.0
H_MIN = 0.0098
H_MAX = 0.0345
GRADE = 0.25
N_HOLE = 40
SEED = 7


def dist_holes(p):
    d1 = np.hypot(p[:, 0] - C, p[:, 1]) - R
    d2 = np.hypot(p[:, 0] + C, p[:, 1]) - R
    return np.minimum(d1, d2)


def sdf(p):
    box = np.maximum(np.abs(p[:, 0]), np.abs(p[:, 1])) - 1.0
    return np.maximum(box, -dist_holes(p))


def size(p):
    return np.minimum(H_MAX, H_MIN + GRADE * np.maximum(dist_holes(p), 0.0))


def fixed_points():
    pts = []
    n_side = int(round(2.0 / H_MAX))
    t = np.linspace(-1.0, 1.0, n_side + 1)
    for s in t[:-1]:
        pts += [(s, -1.0), (1.0, s), (-s, 1.0), (-1.0, -s)]
    marks = [1] * len(pts)
    ang = 2.0 * np.pi * np.arange(N_HOLE) / N_HOLE
    for cx, m in ((C, 2), (-C, 3)):
        pts += [(cx + R * np.cos(a), R * np.sin(a)) for a in ang]
        marks += [m] * N_HOLE
    return np.array(pts), marks


def main():
    rng = np.random.default_rng(SEED)
    fixed, marks = fixed_points()
    nf = len(fixed)
    h0 = H_MIN / 2
    xs, ys = np.meshgrid(np.arange(-1, 1 + h0, h0), np.arange(-1, 1 + h0 * np.sqrt(3) / 2, h0 * np.sqrt(3) / 2))
    xs[1::2] += h0 / 2
    p = np.column_stack([xs.ravel(), ys.ravel()])
    p = p[sdf(p) < -0.3 * H_MIN]
    keep = rng.random(len(p)) < (h0 / size(p)) ** 2
    p = np.vstack([fixed, p[keep]])

    for it in range(300):
        tri = Delaunay(p).simplices
        cent = p[tri].mean(axis=1)
        tri = tri[sdf(cent) < -1e-3 * H_MIN]
        e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        e = np.unique(np.sort(e, axis=1), axis=0)
        vec = p[e[:, 0]] - p[e[:, 1]]
        L = np.hypot(vec[:, 0], vec[:, 1])
        hb = size((p[e[:, 0]] + p[e[:, 1]]) / 2)
        L0 = hb * 1.2 * np.sqrt((L**2).sum() / (hb**2).sum())
        F = np.maximum(L0 - L, 0.0)
        fv = (F / L)[:, None] * vec
        force = np.zeros_like(p)
        np.add.at(force, e[:, 0], fv)
        np.add.at(force, e[:, 1], -fv)
        force[:nf] = 0.0
        p = p + 0.2 * force
        # project escaped points back onto the boundary
        d = sdf(p)
        out = d > 0
        if out.any():
            eps = 1e-8
            q = p[out]
            gx = (sdf(q + [eps, 0]) - d[out]) / eps
            gy = (sdf(q + [0, eps]) - d[out]) / eps
            p[out] = q - np.column_stack([d[out] * gx, d[out] * gy])
        if np.abs(0.2 * force[nf:]).max() < 1e-4 * H_MIN:
            break

    tri = Delaunay(p).simplices
    cent = p[tri].mean(axis=1)
    tri = tri[sdf(cent) < -1e-3 * H_MIN]
    # counter-clockwise orientation
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri[det < 0] = tri[det < 0][:, [0, 2, 1]]
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=int)
    remap[used] = np.arange(len(used))
    allmarks = np.array(marks + [0] * (len(p) - nf))
    out = [f"{len(used)} 2 0 1"]
    for i, v in enumerate(used):
        out.append(f"{i} {float(p[v, 0])!r} {float(p[v, 1])!r} {allmarks[v]}")
    out.append(f"{len(tri)} 3 0")
    for i, t in enumerate(remap[tri]):
        out.append(f"{i} {t[0]} {t[1]} {t[2]}")
    sys.stdout.write("\n".join(out) + "\n")
    print(f"vertices {len(used)} triangles {len(tri)}", file=sys.stderr)


if __name__ == "__main__":
    main()
