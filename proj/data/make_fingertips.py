"""Writes the sample fingertip meshes (ASCII STL) used by data/cell.json."""
import pathlib


def box(x0, y0, z0, x1, y1, z1):
    v = [(x, y, z) for z in (z0, z1) for y in (y0, y1) for x in (x0, x1)]
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris.append((v[a], v[b], v[c]))
        tris.append((v[a], v[c], v[d]))
    return tris


def normal(t):
    (ax, ay, az), (bx, by, bz), (cx, cy, cz) = t
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    n = (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx)
    length = sum(c * c for c in n) ** 0.5
    return tuple(c / length for c in n)


def write(path, name, parts):
    lines = [f"solid {name}"]
    for part in parts:
        for t in box(*part):
            lines.append("  facet normal {:g} {:g} {:g}".format(*normal(t)))
            lines.append("    outer loop")
            for p in t:
                lines.append("      vertex {:g} {:g} {:g}".format(*p))
            lines.append("    endloop")
            lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    path.write_text("\n".join(lines) + "\n")


# Plate plus a profile that matches the object; dimensions in mm, modelled
# lying down (long axis along z) so the designs need a rotation to print.
SHAPES = {
    "key": [(0, 0, 0, 16, 4, 30), (0, 4, 0, 6, 10, 30), (10, 4, 0, 16, 10, 30)],
    "ethernet": [(0, 0, 0, 18, 4, 28), (0, 4, 0, 4, 12, 28), (14, 4, 0, 18, 12, 28), (4, 4, 20, 14, 7, 28)],
    "battery": [(0, 0, 0, 20, 4, 26), (0, 4, 0, 3, 14, 26), (17, 4, 0, 20, 14, 26)],
}

if __name__ == "__main__":
    here = pathlib.Path(__file__).parent
    for name, parts in SHAPES.items():
        write(here / f"{name}_fingertip.stl", name, parts)
