"""Reading and writing scalar fields.

CSV (1D): optional ``#`` comment lines (the provenance header), then
``x,value`` rows written with 17 significant digits so that values
round-trip exactly.  Fields on 2D grids are written with ``x,y,value``
columns but can only be read back from JSON.

JSON: ``{dim, extent, n, h, stencil, mask_kind, mask, values}`` with
``values`` laid out on the full index box and ``null`` outside the mask.
Distance fields add ``sources``.  Python's float repr is the shortest
string that round-trips, so JSON output is also exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import ScalarField, build_grid
from .metric import DistanceField, geodesic_distance


def provenance_line(prov: dict | None) -> str:
    return "" if prov is None else "# " + json.dumps(prov, sort_keys=True) + "\n"


def field_to_csv(field: ScalarField, provenance: dict | None = None) -> str:
    g = field.grid
    cols = ["x", "y"][: g.dim] + ["value"]
    lines = [provenance_line(prov=provenance), ",".join(cols) + "\n"]
    for c, v in zip(g.coords, field.values):
        lines.append(",".join(f"{t:.17g}" for t in (*c, v)) + "\n")
    return "".join(lines)


def field_from_csv(text: str) -> ScalarField:
    """Parse a 1D ``x,value`` CSV; the grid is rebuilt from the first and last ``x``."""
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty CSV")
    head = [c.strip() for c in rows[0].split(",")]
    if head != ["x", "value"]:
        raise ValueError(f"expected header 'x,value', got {rows[0]!r}")
    data = np.array([[float(t) for t in ln.split(",")] for ln in rows[1:]])
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("every CSV row needs two columns")
    x, v = data[:, 0], data[:, 1]
    grid = build_grid(1, (x[0], x[-1]), len(x))
    if np.max(np.abs(grid.coords[:, 0] - x)) > 1e-9 * (x[-1] - x[0]):
        raise ValueError("x column is not uniformly spaced")
    return ScalarField(grid, v)


def field_to_dict(field: ScalarField) -> dict:
    g = field.grid
    box = np.full(g.n, None, dtype=object)
    box[tuple(g.multi_index.T)] = [float(v) for v in field.values]
    out = {
        "dim": g.dim,
        "extent": [list(e) for e in g.extent],
        "n": list(g.n),
        "h": list(g.h),
        "stencil": len(g.stencil),
        "mask_kind": g.mask_kind,
        "mask": g.mask.astype(int).tolist(),
        "values": box.tolist(),
    }
    if isinstance(field, DistanceField) and field.sources is not None:
        out["sources"] = [int(s) for s in field.sources]
    return out


def field_from_dict(d: dict) -> ScalarField:
    dim = int(d["dim"])
    mask = np.asarray(d["mask"], dtype=bool)
    stencil = int(d.get("stencil", 2 if dim == 1 else 8))
    grid = build_grid(dim, d["extent"], d["n"], mask, stencil if dim == 2 else None)
    box = np.array(d["values"], dtype=object)
    vals = box[tuple(grid.multi_index.T)]
    if any(v is None for v in vals):
        raise ValueError("missing value at a masked node")
    values = np.array(vals, dtype=float)
    if "sources" in d:
        origin = geodesic_distance(grid, d["sources"]).origin
        return DistanceField(grid, values, sources=np.asarray(d["sources"], dtype=np.int64), origin=origin)
    return ScalarField(grid, values)


def field_to_json(field: ScalarField, provenance: dict | None = None) -> str:
    d = field_to_dict(field)
    if provenance is not None:
        d = {"provenance": provenance, **d}
    return json.dumps(d, sort_keys=True) + "\n"


def field_from_json(text: str) -> ScalarField:
    return field_from_dict(json.loads(text))


def write_field(field: ScalarField, path, provenance: dict | None = None) -> Path:
    """Write by extension: ``.csv`` or ``.json``."""
    path = Path(path)
    text = field_to_json(field, provenance) if path.suffix == ".json" else field_to_csv(field, provenance)
    path.write_text(text)
    return path


def read_field(path) -> ScalarField:
    path = Path(path)
    text = path.read_text()
    return field_from_json(text) if path.suffix == ".json" else field_from_csv(text)
