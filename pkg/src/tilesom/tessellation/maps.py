"""Combinatorial maps: gluing tables and their flag representation.

A flag is a (face, side, end) triple.  Three involutions act on flags:

* ``r0`` swaps the end of the side (same face, same side),
* ``r1`` swaps the side at a corner (same face, same vertex),
* ``r2`` crosses the side into the glued face (-1 on an unglued side).

Faces, vertices and edges are the orbits of <r0,r1>, <r1,r2> and <r0,r2>.
A gluing ``glue fA sA fB sB N`` identifies vertex sA of fA with vertex sB+1
of fB (the orientation-compatible way); ``R`` identifies sA with sB.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GluingError(ValueError):
    """Malformed gluing table or inconsistent vertex cycles."""


@dataclass
class GluingTable:
    sides: list[int]
    glues: list[tuple[int, int, int, int, bool]]
    meta: dict = field(default_factory=dict)

    @property
    def n_faces(self) -> int:
        return len(self.sides)

    def dumps(self) -> str:
        lines = [f"# {k} {v}" for k, v in sorted(self.meta.items())]
        lines.append(f"faces {len(self.sides)}")
        lines += [f"face {i} {s}" for i, s in enumerate(self.sides)]
        for fa, sa, fb, sb, rev in self.glues:
            lines.append(f"glue {fa} {sa} {fb} {sb} {'R' if rev else 'N'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GluingTable":
        sides: dict[int, int] = {}
        glues = []
        meta = {}
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split(None, 1)
                if len(parts) == 2:
                    meta[parts[0]] = parts[1]
                continue
            tok = line.split()
            try:
                if tok[0] == "faces":
                    declared = int(tok[1])
                elif tok[0] == "face":
                    sides[int(tok[1])] = int(tok[2])
                elif tok[0] == "glue":
                    if tok[5] not in ("R", "N"):
                        raise GluingError(f"line {lineno}: orientation flag must be R or N")
                    glues.append((int(tok[1]), int(tok[2]), int(tok[3]), int(tok[4]), tok[5] == "R"))
                else:
                    raise GluingError(f"line {lineno}: unknown record {tok[0]!r}")
            except (IndexError, ValueError) as exc:
                if isinstance(exc, GluingError):
                    raise
                raise GluingError(f"line {lineno}: cannot parse {raw!r}") from exc
        if declared is None:
            raise GluingError("missing 'faces' header")
        if sorted(sides) != list(range(declared)):
            raise GluingError("face ids must be 0..faces-1")
        return cls([sides[i] for i in range(declared)], glues, meta)

    @classmethod
    def read(cls, path) -> "GluingTable":
        return cls.loads(Path(path).read_text())

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())


class FlagMap:
    """Flag representation of a (possibly bordered) polygonal map."""

    def __init__(self, sides, r2: np.ndarray):
        self.sides = np.asarray(sides, dtype=np.int64)
        self.offset = np.concatenate([[0], np.cumsum(self.sides)])
        nflags = 2 * int(self.offset[-1])
        self.face = np.repeat(np.arange(len(self.sides)), 2 * self.sides)
        local = np.arange(nflags) // 2 - self.offset[self.face]
        self.side = local
        self.end = np.arange(nflags) % 2
        self.r0 = np.arange(nflags) ^ 1
        nxt = (local + 1) % self.sides[self.face]
        prv = (local - 1) % self.sides[self.face]
        base = 2 * self.offset[self.face]
        self.r1 = np.where(self.end == 1, base + 2 * nxt, base + 2 * prv + 1)
        self.r2 = np.asarray(r2, dtype=np.int64)

    def flag(self, face: int, side: int, end: int) -> int:
        return int(2 * (self.offset[face] + side % self.sides[face]) + end)

    @property
    def n_flags(self) -> int:
        return len(self.r0)

    @property
    def closed(self) -> bool:
        return bool(np.all(self.r2 >= 0))

    @classmethod
    def from_table(cls, table: GluingTable) -> "FlagMap":
        fm = cls(table.sides, np.full(2 * sum(table.sides), -1))
        r2 = fm.r2
        for fa, sa, fb, sb, rev in table.glues:
            for f, s in ((fa, sa), (fb, sb)):
                if not (0 <= f < len(table.sides) and 0 <= s < table.sides[f]):
                    raise GluingError(f"side {s} of face {f} does not exist")
            a0, a1 = fm.flag(fa, sa, 0), fm.flag(fa, sa, 1)
            b0, b1 = fm.flag(fb, sb, 0), fm.flag(fb, sb, 1)
            pairs = ((a0, b0), (a1, b1)) if rev else ((a0, b1), (a1, b0))
            for x, y in pairs:
                if r2[x] >= 0 or r2[y] >= 0 or x == y:
                    raise GluingError(f"side {sa} of face {fa} or side {sb} of face {fb} glued twice")
                r2[x], r2[y] = y, x
        return fm

    def require_closed(self) -> None:
        if not self.closed:
            f = int(self.face[np.argmax(self.r2 < 0)])
            s = int(self.side[np.argmax(self.r2 < 0)])
            raise GluingError(f"side {s} of face {f} is unpaired")

    def orbits(self, gens) -> list[list[int]]:
        seen = np.full(self.n_flags, -1)
        out = []
        for start in range(self.n_flags):
            if seen[start] >= 0:
                continue
            orbit = [start]
            seen[start] = len(out)
            i = 0
            while i < len(orbit):
                x = orbit[i]
                i += 1
                for g in gens:
                    y = int(g[x])
                    if y >= 0 and seen[y] < 0:
                        seen[y] = len(out)
                        orbit.append(y)
            out.append(orbit)
        return out

    def vertex_orbits(self):
        return self.orbits((self.r1, self.r2))

    def edge_orbits(self):
        return self.orbits((self.r0, self.r2))

    def euler_characteristic(self) -> int:
        return len(self.sides) - len(self.edge_orbits()) + len(self.vertex_orbits())

    def orientation(self) -> np.ndarray | None:
        """Two-coloring of flags with every involution swapping colors, or None."""
        color = np.full(self.n_flags, -1)
        for start in range(self.n_flags):
            if color[start] >= 0:
                continue
            color[start] = 0
            queue = deque([start])
            while queue:
                x = queue.popleft()
                for g in (self.r0, self.r1, self.r2):
                    y = int(g[x])
                    if y < 0:
                        continue
                    if color[y] < 0:
                        color[y] = 1 - color[x]
                        queue.append(y)
                    elif color[y] == color[x]:
                        return None
        return color

    @property
    def orientable(self) -> bool:
        return self.orientation() is not None

    def check_trivalent(self) -> None:
        for orb in self.vertex_orbits():
            complete = all(self.r2[f] >= 0 for f in orb)
            if complete and len(orb) != 6:
                f = orb[0]
                raise GluingError(
                    f"vertex at corner {int(self.side[f])} of face {int(self.face[f])} "
                    f"has valence {len(orb) // 2}, expected 3"
                )

    def to_table(self, meta=None) -> GluingTable:
        glues = []
        for x in range(self.n_flags):
            y = int(self.r2[x])
            if y < 0 or self.end[x] != 0 or y < x:
                continue
            fa, sa = int(self.face[x]), int(self.side[x])
            fb, sb = int(self.face[y]), int(self.side[y])
            if (fa, sa) > (fb, sb):
                continue
            glues.append((fa, sa, fb, sb, bool(self.end[y] == 0)))
        # each side pair appears once from its end-0 flag on the smaller side
        seen = set()
        uniq = []
        for g in glues:
            key = (g[0], g[1])
            if key not in seen:
                seen.add(key)
                uniq.append(g)
        return GluingTable([int(s) for s in self.sides], uniq, dict(meta or {}))


def table_from_polygons(polygons, closed: bool = True, meta=None) -> GluingTable:
    """Glue polygons (cyclic vertex-id lists) along sides with equal endpoints.

    Two sides sharing a vertex pair are glued; matching direction decides the
    orientation flag.  Suitable when each vertex pair bounds at most one edge.
    """
    owner: dict[frozenset, list[tuple[int, int, int, int]]] = {}
    for f, poly in enumerate(polygons):
        k = len(poly)
        for s in range(k):
            u, v = poly[s], poly[(s + 1) % k]
            owner.setdefault(frozenset((u, v)), []).append((f, s, u, v))
    glues = []
    for key, occ in owner.items():
        if len(occ) == 1:
            if closed:
                f, s, _, _ = occ[0]
                raise GluingError(f"side {s} of face {f} is unpaired")
            continue
        if len(occ) != 2:
            raise GluingError(f"edge {sorted(key)} bounds {len(occ)} faces")
        (fa, sa, ua, va), (fb, sb, ub, vb) = sorted(occ)
        glues.append((fa, sa, fb, sb, (ua, va) == (ub, vb)))
    glues.sort()
    return GluingTable([len(p) for p in polygons], glues, dict(meta or {}))
