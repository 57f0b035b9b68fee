#!/usr/bin/env python3
"""Generate the offset-cylinder mesh asset.

The domain is the unit disk with a small circular obstacle of radius 0.1
centered at (0.5, 0). Nodes live on nested closed curves that interpolate
between the inner circle (t = 0) and the outer circle (t = 1) at a shared
angle; the segment family never crosses because the angular Jacobian factor
is 0.9 - 0.5*cos(theta) >= 0.4. Radial layers are geometrically graded so
cells stay near-isotropic at the obstacle, where the flow structures are
finest. Outer-circle edges carry tag 1, inner-circle edges tag 2.

Writes crates/flowens/assets/offset_cylinders.mesh (plain text, the format
read by mesh::Mesh::parse). Pure stdlib; rerunning reproduces the file byte
for byte.
"""

import math
import os

SECTORS = 96          # angular divisions shared by both circles
LAYERS = 16           # radial layers between the circles
FIRST_LAYER = 0.008   # normalized thickness of the layer on the obstacle
OUTER_R = 1.0
INNER_R = 0.1
CENTER = (0.5, 0.0)


def radial_knots():
    """Geometric partition of [0, 1]: LAYERS steps growing from FIRST_LAYER."""
    # Solve first * (q**n - 1) / (q - 1) = 1 for the growth ratio q.
    n = LAYERS
    lo, hi = 1.0 + 1e-9, 2.0
    for _ in range(200):
        q = 0.5 * (lo + hi)
        total = FIRST_LAYER * (q**n - 1.0) / (q - 1.0)
        if total < 1.0:
            lo = q
        else:
            hi = q
    q = 0.5 * (lo + hi)
    knots = [0.0]
    step = FIRST_LAYER
    for _ in range(n - 1):
        knots.append(knots[-1] + step)
        step *= q
    knots.append(1.0)
    return knots, q


def build():
    knots, ratio = radial_knots()
    nodes = []
    for t in knots:
        for k in range(SECTORS):
            theta = 2.0 * math.pi * k / SECTORS
            cx, sx = math.cos(theta), math.sin(theta)
            inner = (CENTER[0] + INNER_R * cx, CENTER[1] + INNER_R * sx)
            outer = (OUTER_R * cx, OUTER_R * sx)
            nodes.append(
                (
                    (1.0 - t) * inner[0] + t * outer[0],
                    (1.0 - t) * inner[1] + t * outer[1],
                )
            )

    def node_id(layer, sector):
        return layer * SECTORS + sector % SECTORS

    triangles = []
    for i in range(LAYERS):
        for k in range(SECTORS):
            a = node_id(i, k)
            b = node_id(i, k + 1)
            c = node_id(i + 1, k + 1)
            d = node_id(i + 1, k)
            triangles.append((a, b, c))
            triangles.append((a, c, d))

    boundary = []
    for k in range(SECTORS):
        boundary.append((node_id(0, k), node_id(0, k + 1), 2))
        boundary.append((node_id(LAYERS, k), node_id(LAYERS, k + 1), 1))

    return nodes, triangles, boundary, ratio


def main():
    nodes, triangles, boundary, ratio = build()
    lines = [f"# Offset-cylinder domain: unit disk minus r={INNER_R} disk at {CENTER}."]
    lines.append(f"# {SECTORS} sectors, {LAYERS} graded layers (ratio {ratio:.4f}).")
    lines.append(f"nodes {len(nodes)}")
    lines.extend(f"{x!r} {y!r}" for x, y in nodes)
    lines.append(f"triangles {len(triangles)}")
    lines.extend(f"{a} {b} {c}" for a, b, c in triangles)
    lines.append(f"boundary_edges {len(boundary)}")
    lines.extend(f"{a} {b} {tag}" for a, b, tag in boundary)

    here = os.path.dirname(os.path.abspath(__file__))
    out = os.path.join(here, "..", "crates", "flowens", "assets", "offset_cylinders.mesh")
    with open(out, "w") as f:
        f.write("\n".join(lines) + "\n")

    edge_ratio = 2.0 * math.pi * INNER_R / SECTORS
    print(f"nodes {len(nodes)}, triangles {len(triangles)}, boundary {len(boundary)}")
    print(f"inner edge ~{edge_ratio:.4f}, first layer ~{FIRST_LAYER * 0.4:.4f}..{FIRST_LAYER * 1.4:.4f}")
    print(f"wrote {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
