"""Regenerate the shipped gluing tables in src/tilesom/data/.

Run from the repository root:  python tools/make_gluings.py
"""

from __future__ import annotations

import itertools
import random
import sys
from pathlib import Path

import numpy as np

from tilesom.tessellation.base import antipodal_table, hex_torus_table, platonic_table
from tilesom.tessellation.maps import FlagMap, GluingTable

DATA = Path(__file__).resolve().parents[1] / "src" / "tilesom" / "data"


# ---------------------------------------------------------------- matrix groups
def _mat_mul(a, b, m):
    return (
        (a[0] * b[0] + a[1] * b[2]) % m,
        (a[0] * b[1] + a[1] * b[3]) % m,
        (a[2] * b[0] + a[3] * b[2]) % m,
        (a[2] * b[1] + a[3] * b[3]) % m,
    )


def _closure(gens, mul, canon):
    elems = {canon(g) for g in gens}
    frontier = list(elems)
    while frontier:
        new = []
        for x in frontier:
            for g in gens:
                y = canon(mul(x, g))
                if y not in elems:
                    elems.add(y)
                    new.append(y)
        frontier = new
    return sorted(elems)


def _order(x, mul, canon, ident):
    k, y = 1, canon(x)
    while y != ident:
        y = canon(mul(y, x))
        k += 1
    return k


def regular_map_table(elements, mul, canon, R, Ec, meta) -> GluingTable:
    """Oriented regular map: darts are group elements, faces the cosets g<R>,
    sides glued by g -> gE."""
    index = {g: i for i, g in enumerate(elements)}
    face_of, side_of = {}, {}
    faces = []
    for g in elements:
        if g in face_of:
            continue
        f = len(faces)
        cyc = [g]
        while True:
            h = canon(mul(cyc[-1], R))
            if h == g:
                break
            cyc.append(h)
        for i, h in enumerate(cyc):
            face_of[h], side_of[h] = f, i
        faces.append(len(cyc))
    glues = []
    for g in elements:
        h = canon(mul(g, Ec))
        a = (face_of[g], side_of[g])
        b = (face_of[h], side_of[h])
        if a < b:
            glues.append((a[0], a[1], b[0], b[1], False))
    return GluingTable(faces, sorted(glues), meta)


def klein_quartic() -> GluingTable:
    m = 7

    def canon(x):
        neg = tuple((-v) % m for v in x)
        return min(x, neg)

    mul = lambda a, b: _mat_mul(a, b, m)
    ident = canon((1, 0, 0, 1))
    R = (1, 1, 0, 1)
    sl2 = [x for x in itertools.product(range(m), repeat=4) if (x[0] * x[3] - x[1] * x[2]) % m == 1]
    for Ec in sorted({canon(x) for x in sl2}):
        if Ec == ident or _order(Ec, mul, canon, ident) != 2:
            continue
        if _order(mul(R, Ec), mul, canon, ident) != 3:
            continue
        G = _closure([R, Ec], mul, canon)
        if len(G) == 168:
            return regular_map_table(G, mul, canon, R, Ec, {"name": "kq", "schlafli": "7 3"})
    raise RuntimeError("no Klein quartic generators found")


def bolza() -> GluingTable:
    m = 3
    canon = lambda x: x
    mul = lambda a, b: _mat_mul(a, b, m)
    ident = (1, 0, 0, 1)
    gl2 = [x for x in itertools.product(range(m), repeat=4) if (x[0] * x[3] - x[1] * x[2]) % m != 0]
    for R in gl2:
        if _order(R, mul, canon, ident) != 8:
            continue
        for Ec in gl2:
            if _order(Ec, mul, canon, ident) != 2 or _order(mul(R, Ec), mul, canon, ident) != 3:
                continue
            G = _closure([R, Ec], mul, canon)
            if len(G) == 48:
                return regular_map_table(G, mul, canon, R, Ec, {"name": "bolza", "schlafli": "8 3"})
    raise RuntimeError("no Bolza generators found")


# ------------------------------------------------------------------- covers
def double_covers(table: GluingTable):
    """All connected unbranched double covers of an orientable trivalent map,
    as voltage assignments on edges with zero sum around every vertex."""
    fm = FlagMap.from_table(table)
    edges = table.glues
    eidx = {}
    for k, (fa, sa, fb, sb, _) in enumerate(edges):
        eidx[(fa, sa)] = k
        eidx[(fb, sb)] = k
    verts = fm.vertex_orbits()
    rows = []
    for orb in verts:
        row = np.zeros(len(edges), dtype=np.int64)
        for f in orb:
            if fm.end[f] == 0:
                row[eidx[(int(fm.face[f]), int(fm.side[f]))]] ^= 1
        rows.append(row)
    A = np.array(rows) % 2
    sols = _gf2_nullspace(A)
    seen = []
    for coeffs in itertools.product((0, 1), repeat=len(sols)):
        if not any(coeffs):
            continue
        v = np.zeros(len(edges), dtype=np.int64)
        for c, s in zip(coeffs, sols):
            if c:
                v ^= s
        t = _lift(table, v)
        fm2 = FlagMap.from_table(t)
        if len(fm2.orbits((fm2.r0, fm2.r1, fm2.r2))) == 1:
            yield t


def _gf2_nullspace(A):
    A = A.copy() % 2
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if A[i, c]), None)
        if piv is None:
            continue
        A[[r, piv]] = A[[piv, r]]
        for i in range(rows):
            if i != r and A[i, c]:
                A[i] ^= A[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fcol in free:
        v = np.zeros(cols, dtype=np.int64)
        v[fcol] = 1
        for i, pc in enumerate(pivots):
            if A[i, fcol]:
                v[pc] = 1
        basis.append(v)
    return basis


def _lift(table: GluingTable, volt) -> GluingTable:
    nf = table.n_faces
    glues = []
    for k, (fa, sa, fb, sb, rev) in enumerate(table.glues):
        for x in (0, 1):
            y = x ^ int(volt[k])
            glues.append((fa + nf * x, sa, fb + nf * y, sb, rev))
    return GluingTable(table.sides * 2, sorted(glues), dict(table.meta))


def orientation_double_cover(table: GluingTable) -> GluingTable:
    """Orientable double cover: sheet 1 carries the mirrored faces."""
    nf = table.n_faces
    sides = table.sides * 2
    glues = []
    for fa, sa, fb, sb, rev in table.glues:
        kb = table.sides[fb]
        ka = table.sides[fa]
        if not rev:
            glues.append((fa, sa, fb, sb, False))
            glues.append((fa + nf, ka - 1 - sa, fb + nf, kb - 1 - sb, False))
        else:
            glues.append((fa, sa, fb + nf, kb - 1 - sb, False))
            glues.append((fa + nf, ka - 1 - sa, fb, sb, False))
    return GluingTable(sides, sorted(glues), dict(table.meta))


# ------------------------------------------------------------------- search
def random_trivalent(nfaces: int, p: int, orientable: bool, seed: int, tries: int = 200000) -> GluingTable:
    """Randomized search for a trivalent gluing of ``nfaces`` p-gons."""
    rng = random.Random(seed)
    sides = [p] * nfaces
    for attempt in range(tries):
        fm = FlagMap(sides, np.full(2 * p * nfaces, -1))
        r2 = fm.r2
        ok = True
        while ok:
            forced = None
            best, best_len = None, -1
            open_sides = [(f, s) for f in range(nfaces) for s in range(p) if r2[fm.flag(f, s, 0)] < 0]
            if not open_sides:
                break
            # chains: start at an open flag, walk r1/r2 until the next open flag
            for f, s in open_sides:
                for e in (0, 1):
                    start = fm.flag(f, s, e)
                    x, corners = start, 0
                    while True:
                        x = int(fm.r1[x])
                        corners += 1
                        y = int(r2[x])
                        if y < 0:
                            break
                        x = y
                    if corners > 3:
                        ok = False
                    elif corners == 3:
                        forced = (start, x)
                    elif corners > best_len:
                        best, best_len = x, corners
                    if not ok or forced:
                        break
                if not ok or forced:
                    break
            if not ok:
                break
            if forced:
                a, b = forced
            else:
                # extend the longest open vertex chain
                a = best
                f2, s2 = rng.choice(open_sides)
                e2 = 1 - int(fm.end[a]) if orientable else rng.randrange(2)
                b = fm.flag(f2, s2, e2)
            if a == b or int(fm.r0[a]) == b or r2[a] >= 0 or r2[b] >= 0:
                ok = False
                break
            if fm.face[a] == fm.face[b] or (orientable and fm.end[a] == fm.end[b]):
                ok = False
                break
            ra, rb = int(fm.r0[a]), int(fm.r0[b])
            if r2[ra] >= 0 or r2[rb] >= 0:
                ok = False
                break
            r2[a], r2[b], r2[ra], r2[rb] = b, a, rb, ra
        if not ok:
            continue
        try:
            fm.check_trivalent()
        except ValueError:
            continue
        if len(fm.orbits((fm.r0, fm.r1, fm.r2))) != 1:
            continue
        if fm.orientable != orientable:
            continue
        return fm.to_table()
    raise RuntimeError("search failed")


def random_orientable_trivalent(nfaces: int, p: int, seed: int, max_nodes: int = 200000) -> GluingTable:
    """Randomized backtracking over vertex 3-cycles for an orientable trivalent
    map of ``nfaces`` p-gons.  Darts are sides; face rotation is fixed, the
    edge involution alpha is built so that sigma^-1 alpha has only 3-cycles."""
    rng = random.Random(seed)
    n = nfaces * p
    sigma = [p * (d // p) + (d % p + 1) % p for d in range(n)]
    sinv = [0] * n
    for d, e in enumerate(sigma):
        sinv[e] = d
    while True:
        alpha = [-1] * n
        nu = [-1] * n
        nodes = [0]

        def pair(x, y, undo):
            if x // p == y // p:
                return False
            if alpha[x] == y:
                return True
            if alpha[x] >= 0 or alpha[y] >= 0:
                return False
            alpha[x], alpha[y] = y, x
            undo.append((x, y))
            return True

        def solve():
            nodes[0] += 1
            if nodes[0] > max_nodes:
                return False
            free = [d for d in range(n) if nu[d] < 0]
            if not free:
                return True
            d = free[0]
            es = [sinv[alpha[d]]] if alpha[d] >= 0 else rng.sample(free[1:], len(free) - 1)
            for e in es:
                if e == d or nu[e] >= 0:
                    continue
                gs = [alpha[sigma[d]]] if alpha[sigma[d]] >= 0 else rng.sample(free[1:], len(free) - 1)
                for g in gs:
                    if g in (d, e) or nu[g] >= 0:
                        continue
                    undo = []
                    if pair(d, sigma[e], undo) and pair(e, sigma[g], undo) and pair(g, sigma[d], undo):
                        nu[d], nu[e], nu[g] = e, g, d
                        if solve():
                            return True
                        nu[d] = nu[e] = nu[g] = -1
                    for x, y in undo:
                        alpha[x] = alpha[y] = -1
                    if nodes[0] > max_nodes:
                        return False
            return False

        if not solve():
            continue
        glues = []
        for d in range(n):
            if d < alpha[d]:
                glues.append((d // p, d % p, alpha[d] // p, alpha[d] % p, False))
        table = GluingTable([p] * nfaces, glues)
        fm = FlagMap.from_table(table)
        if len(fm.orbits((fm.r0, fm.r1, fm.r2))) == 1:
            fm.check_trivalent()
            return table


def _diameter(table: GluingTable, p: int, a: int, b: int) -> int:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    from tilesom.geometry import GeometryClass
    from tilesom.tessellation.goldberg import Subdivision

    sd = Subdivision(FlagMap.from_table(table), a, b, p, GeometryClass.of_schlafli(p, 3))
    e = np.array(sd.edges)
    adj = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(sd.n, sd.n))
    return int(shortest_path(adj + adj.T, unweighted=True, directed=False).max())


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    tables = {}
    tables["sphere"] = platonic_table(5)
    tables["sphere4"] = platonic_table(4)
    tables["elliptic"] = antipodal_table(5)
    tables["torus-hex"] = hex_torus_table(*TORI["torus-hex"])
    tables["torus-sq"] = hex_torus_table(*TORI["torus-sq"])
    tables["torus-rec"] = hex_torus_table(*TORI["torus-rec"])
    tables["klein-sq"] = hex_torus_table(*TORI["klein-sq"], klein=True)
    tables["kq"] = klein_quartic()
    tables["bolza"] = bolza()
    # no double cover reaches the tabulated diameter 12; take the first of the smallest
    covers = list(double_covers(tables["bolza"]))
    diams = [_diameter(t, 8, 5, 1) for t in covers]
    tables["bolza2"] = covers[diams.index(min(diams))]
    # seeds picked so the subdivided diameters match the table (17 and 16)
    tables["minimal"] = random_trivalent(6, 7, orientable=False, seed=1, tries=20000)
    tables["zebra"] = random_orientable_trivalent(12, 7, seed=2, max_nodes=5000)
    for name, t in tables.items():
        fm = FlagMap.from_table(t)
        t.meta = {"name": name, "euler_characteristic": fm.euler_characteristic()}
        t.write(DATA / f"{name}.glue")
        print(name, t.n_faces, fm.euler_characteristic(), fm.orientable)


TORI = {
    "torus-hex": ((23, 0), (0, 23)),
    "torus-sq": ((20, 0), (-13, 26)),
    "torus-rec": ((29, 0), (-9, 18)),
    "klein-sq": ((20, 0), (0, 26)),
}


if __name__ == "__main__":
    main()
