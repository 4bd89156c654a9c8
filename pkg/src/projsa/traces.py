"""CSV traces with a JSON provenance line.

Layout::

    # {"metadata": ..., "x_init": [...], "aggregates": ...}
    n,t,gamma,x_0,...,e_0,...,r_0,...,h_0,...,P_0,...
    1,0.5,0.5,...

Reals are written with ``repr``, the shortest string that parses back to
the same double, so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import Trajectory

_BLOCKS = ("x", "e", "r", "h", "P")


class TraceFormatError(ValueError):
    pass


def header(dim: int) -> list:
    cols = ["n", "t", "gamma"]
    for b in _BLOCKS:
        cols += [f"{b}_{i}" for i in range(dim)]
    return cols


def _provenance(traj: Trajectory) -> str:
    meta = {k: v for k, v in traj.metadata.items() if k != "backend"}
    doc = {"metadata": meta, "x_init": traj.x_init.tolist(), "aggregates": traj.aggregates}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def write_trace(traj: Trajectory, path) -> Path:
    path = Path(path)
    d = traj.dim
    reals = np.hstack([traj.t[:, None], traj.gamma[:, None], traj.x, traj.e, traj.r, traj.h, traj.P])
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + _provenance(traj) + "\n")
        fh.write(",".join(header(d)) + "\n")
        for n, row in zip(traj.n.tolist(), reals.tolist()):
            fh.write(str(n) + "," + ",".join(map(repr, row)) + "\n")
    return path


def read_trace(path) -> Trajectory:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise TraceFormatError(f"{path}: missing provenance line")
        try:
            doc = json.loads(first[2:])
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"{path}: bad provenance line ({exc})") from None
        cols = fh.readline().rstrip("\n").split(",")
        dim = len(doc["x_init"])
        if cols != header(dim):
            raise TraceFormatError(f"{path}: header does not match dimension {dim}")
        width = len(cols)
        ns, reals = [], []
        for lineno, line in enumerate(fh, start=3):
            parts = line.rstrip("\n").split(",")
            if len(parts) != width:
                raise TraceFormatError(f"{path}:{lineno}: expected {width} fields, got {len(parts)}")
            try:
                ns.append(int(parts[0]))
                reals.append([float(p) for p in parts[1:]])
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: unparsable field") from None
    arr = np.array(reals, dtype=float).reshape(len(reals), width - 1)
    blocks = {b: arr[:, 2 + i * dim : 2 + (i + 1) * dim] for i, b in enumerate(_BLOCKS)}
    meta = doc["metadata"]
    if meta.get("record_policy", {}).get("kind") == "full" and len(ns) != meta.get("n_steps"):
        raise TraceFormatError(f"{path}: trace is truncated ({len(ns)} of {meta.get('n_steps')} rows)")
    return Trajectory(
        n=np.array(ns, dtype=np.int64),
        t=arr[:, 0].copy(),
        gamma=arr[:, 1].copy(),
        x=blocks["x"].copy(),
        e=blocks["e"].copy(),
        r=blocks["r"].copy(),
        h=blocks["h"].copy(),
        P=blocks["P"].copy(),
        x_init=np.array(doc["x_init"], dtype=float),
        metadata=meta,
        aggregates=doc.get("aggregates", {}),
    )
