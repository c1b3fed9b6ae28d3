"""Brute-force ground truth: exhaustive breadth-first enumeration of the
transformation group's action on all matrices of a (small) strip profile.

States are flat integer tuples over the nonzero cells of the profile;
every admissible move instance is compiled once into a closure.  Adds are
enumerated with k = 1 only: every coefficient is a power of the k = 1
generator under composition, and all cell exponents divide 24, so nothing
is lost.  The tractability bound is a hard precondition: a partial orbit
is never returned.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from .matrix import BlockMatrix, StripProfile, cell_modulus, validate
from .moves import Move, move_instances
from .schema import SchemaId, StripId, compose_factor, get_schema

DEFAULT_BOUND = 10 ** 6


class OrbitBoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class _Space:
    """Compiled description of the state space of one (schema, profile)."""

    schema_id: SchemaId
    profile: StripProfile
    cells: tuple  # (row_strip, col_strip, modulus, nrows, ncols, offset)
    size: int
    length: int

    def index(self, rs, i, cs, j) -> int:
        for crs, ccs, _m, _nr, nc, off in self.cells:
            if crs == rs and ccs == cs:
                return off + i * nc + j
        raise KeyError((rs, cs))


def build_space(schema_id: SchemaId, profile: StripProfile) -> _Space:
    cells = []
    offset = 0
    size = 1
    for rs, nr in profile.rows:
        for cs, nc in profile.cols:
            m = cell_modulus(schema_id, rs, cs)
            if m == 0:
                continue
            cells.append((rs, cs, m, nr, nc, offset))
            offset += nr * nc
            size *= m ** (nr * nc)
    return _Space(schema_id, profile, tuple(cells), size, offset)


def state_of(m: BlockMatrix, space: _Space) -> tuple:
    flat = []
    for rs, cs, _mod, _nr, _nc, _off in space.cells:
        for row in m.blocks[(rs, cs)]:
            flat.extend(row)
    return tuple(flat)


def matrix_of_state(space: _Space, state: tuple) -> BlockMatrix:
    entries = {}
    for rs, cs, _mod, nr, nc, off in space.cells:
        entries[(rs, cs)] = [[state[off + i * nc + j] for j in range(nc)]
                             for i in range(nr)]
    return BlockMatrix.build(space.schema_id, space.profile.rows,
                             space.profile.cols, entries)


def _schema_for_profile(schema_id: SchemaId, profile: StripProfile):
    cap = 1
    for s, _ in profile.rows + profile.cols:
        if s.kind == "M3":
            cap = max(cap, s.param)
    return get_schema(schema_id, cap, cap)


def _gen_tables(schema_id: SchemaId, profile: StripProfile):
    """(space, [(Move, kind, table)]) with raw index tables per generator."""
    space = build_space(schema_id, profile)
    schema = _schema_for_profile(schema_id, profile)
    tables = []
    for mv in move_instances(schema, profile):
        rule = next(r for r in schema.rules
                    if r.kind == mv.kind and r.src == mv.src and r.dst == mv.dst)
        row_side = mv.kind.startswith("row")
        axis = profile.cols if row_side else profile.rows
        if mv.kind.endswith("add"):
            triples = []
            for strip, _d in axis:
                if row_side:
                    dst_m = cell_modulus(schema_id, mv.dst, strip)
                    src_m = cell_modulus(schema_id, mv.src, strip)
                else:
                    dst_m = cell_modulus(schema_id, strip, mv.dst)
                    src_m = cell_modulus(schema_id, strip, mv.src)
                if dst_m == 0 or src_m == 0:
                    continue
                coef = rule.mult * compose_factor(mv.src, mv.dst, strip, row_side)
                if row_side:
                    for c in range(profile.col_dim(strip)):
                        triples.append((space.index(mv.src, mv.i, strip, c),
                                        space.index(mv.dst, mv.j, strip, c),
                                        coef, dst_m))
                else:
                    for r in range(profile.row_dim(strip)):
                        triples.append((space.index(strip, r, mv.src, mv.i),
                                        space.index(strip, r, mv.dst, mv.j),
                                        coef, dst_m))
            if triples:
                tables.append((mv, "add", tuple(triples)))
        elif mv.kind.endswith("scale"):
            pairs = []
            for strip, _d in axis:
                key = (mv.src, strip) if row_side else (strip, mv.src)
                mod = cell_modulus(schema_id, *key)
                if mod == 0:
                    continue
                if row_side:
                    for c in range(profile.col_dim(strip)):
                        pairs.append((space.index(mv.src, mv.i, strip, c), mod))
                else:
                    for r in range(profile.row_dim(strip)):
                        pairs.append((space.index(strip, r, mv.src, mv.i), mod))
            if pairs:
                tables.append((mv, "scale", tuple(pairs)))
        else:
            swaps = []
            negs = []
            for strip, _d in axis:
                key = (mv.src, strip) if row_side else (strip, mv.src)
                mod = cell_modulus(schema_id, *key)
                if mod == 0:
                    continue
                if row_side:
                    for c in range(profile.col_dim(strip)):
                        a = space.index(mv.src, mv.i, strip, c)
                        b = space.index(mv.src, mv.j, strip, c)
                        swaps.append((a, b))
                        if mv.neg:
                            negs.append((a if mv.neg == "i" else b, mod))
                else:
                    for r in range(profile.row_dim(strip)):
                        a = space.index(strip, r, mv.src, mv.i)
                        b = space.index(strip, r, mv.src, mv.j)
                        swaps.append((a, b))
                        if mv.neg:
                            negs.append((a if mv.neg == "i" else b, mod))
            if swaps:
                tables.append((mv, "swap", (tuple(swaps), tuple(negs))))
    return space, tables


def compile_generators(schema_id: SchemaId, profile: StripProfile):
    """[(closure, Move)] for every admissible move instance with k=1."""
    return _compile_generators_cached(schema_id, profile.rows, profile.cols)


@lru_cache(maxsize=None)
def _compile_generators_cached(schema_id: SchemaId, rows, cols):
    profile = StripProfile.make(rows, cols)
    space, tables = _gen_tables(schema_id, profile)
    gens = []
    for mv, kind, table in tables:
        if kind == "add":
            def gen_add(state, triples=table):
                out = list(state)
                for si, di, coef, mod in triples:
                    out[di] = (out[di] + coef * state[si]) % mod
                return tuple(out)

            gens.append((gen_add, mv))
        elif kind == "scale":
            def gen_scale(state, pairs=table):
                out = list(state)
                for idx, mod in pairs:
                    out[idx] = (-out[idx]) % mod
                return tuple(out)

            gens.append((gen_scale, mv))
        else:
            def gen_swap(state, table=table):
                swaps, negs = table
                out = list(state)
                for a, b in swaps:
                    out[a], out[b] = out[b], out[a]
                for idx, mod in negs:
                    out[idx] = (-out[idx]) % mod
                return tuple(out)

            gens.append((gen_swap, mv))
    return space, gens


def numpy_generators(schema_id: SchemaId, profile: StripProfile):
    """(space, [function(2D array) -> 2D array]) for bulk orbit BFS."""
    return _numpy_generators_cached(schema_id, profile.rows, profile.cols)


@lru_cache(maxsize=None)
def _numpy_generators_cached(schema_id: SchemaId, rows, cols):
    profile = StripProfile.make(rows, cols)
    space, tables = _gen_tables(schema_id, profile)
    fns = []
    for _mv, kind, table in tables:
        if kind == "add":
            def f_add(arr, triples=table):
                out = arr.copy()
                for si, di, coef, mod in triples:
                    out[:, di] = (out[:, di] + coef * arr[:, si]) % mod
                return out

            fns.append(f_add)
        elif kind == "scale":
            def f_scale(arr, pairs=table):
                out = arr.copy()
                for idx, mod in pairs:
                    out[:, idx] = (mod - out[:, idx]) % mod
                return out

            fns.append(f_scale)
        else:
            swaps, negs = table
            perm = list(range(space.length))
            for a, b in swaps:
                perm[a], perm[b] = perm[b], perm[a]

            def f_swap(arr, perm=tuple(perm), negs=negs):
                out = arr[:, perm]
                for idx, mod in negs:
                    out[:, idx] = (mod - out[:, idx]) % mod
                return out

            fns.append(f_swap)
    return space, fns


@lru_cache(maxsize=None)
def space_places(schema_id: SchemaId, rows, cols):
    """Per-position place values packing a state into one 63-bit int by
    per-cell mixed radix; None when the space does not fit."""
    profile = StripProfile.make(rows, cols)
    space = build_space(schema_id, profile)
    mods = []
    for _rs, _cs, mod, nr, nc, _off in space.cells:
        mods.extend([mod] * (nr * nc))
    places = [1] * len(mods)
    total = 1
    for i in range(len(mods) - 1, -1, -1):
        places[i] = total
        total *= mods[i]
        if total > 1 << 62:
            return None
    return tuple(places)


def pack_state(places, state) -> int:
    return sum(p * v for p, v in zip(places, state))


def orbit_members_np(schema_id: SchemaId, profile: StripProfile, start: tuple,
                     cap: int):
    """The orbit of ``start`` as (min member tuple, list of packed member
    keys); None when the orbit exceeds ``cap`` members or the space does
    not pack into 63 bits."""
    import numpy as np

    places = space_places(schema_id, profile.rows, profile.cols)
    if places is None:
        return None
    space, fns = numpy_generators(schema_id, profile)
    if space.length == 0 or not fns:
        return start, [pack_state(places, start)]
    radix = np.array(places, dtype=np.int64)
    frontier = np.array([start], dtype=np.int64)
    blocks = [frontier]
    seen = frontier @ radix
    best_key = int(seen[0])
    best_state = start
    while len(frontier):
        if len(frontier) * len(fns) > 6 * cap:
            return None
        new = np.vstack([fn(frontier) for fn in fns])
        keys = new @ radix
        order = np.argsort(keys)
        keys, new = keys[order], new[order]
        keep = np.ones(len(new), dtype=bool)
        keep[1:] = keys[1:] != keys[:-1]
        keys, new = keys[keep], new[keep]
        pos = np.searchsorted(seen, keys)
        pos_c = np.minimum(pos, len(seen) - 1)
        fresh = seen[pos_c] != keys
        keys, new = keys[fresh], new[fresh]
        if len(seen) + len(keys) > cap:
            return None
        if not len(keys):
            break
        seen = np.concatenate([seen, keys])
        seen.sort()
        blocks.append(new)
        frontier = new
        lvl_min = int(keys[0])
        if lvl_min < best_key:
            best_key = lvl_min
            best_state = tuple(int(x) for x in new[0])
    return best_state, [int(k) for k in seen.tolist()]


def _digest(state: tuple) -> bytes:
    return hashlib.sha256(bytes(state)).digest()


def _expand_orbit(start: tuple, gens) -> set:
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for state in frontier:
            for gen, _mv in gens:
                ns = gen(state)
                if ns not in seen:
                    seen.add(ns)
                    nxt.append(ns)
        frontier = nxt
    return seen


def _components(space: _Space, state: tuple) -> int:
    """Connected components of the row/column incidence graph, counting
    zero rows and columns as isolated vertices."""
    verts = []
    for rs, nr in space.profile.rows:
        verts += [("r", rs, i) for i in range(nr)]
    for cs, nc in space.profile.cols:
        verts += [("c", cs, j) for j in range(nc)]
    parent = {v: v for v in verts}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for rs, cs, _mod, nr, nc, off in space.cells:
        for i in range(nr):
            for j in range(nc):
                if state[off + i * nc + j]:
                    union(("r", rs, i), ("c", cs, j))
    return len({find(v) for v in verts})


def orbit(m: BlockMatrix, bound: int = DEFAULT_BOUND) -> set[BlockMatrix]:
    """The full orbit of a matrix under the admissible transformations."""
    problem = validate(m)
    if problem is not None:
        raise ValueError(problem)
    space, gens = compile_generators(m.schema_id, m.profile)
    if space.size > bound:
        raise OrbitBoundExceeded(f"state space {space.size} exceeds bound {bound}")
    states = _expand_orbit(state_of(m, space), gens)
    return {matrix_of_state(space, s) for s in states}


def same_orbit(m1: BlockMatrix, m2: BlockMatrix, bound: int = DEFAULT_BOUND) -> bool:
    space, gens = compile_generators(m1.schema_id, m1.profile)
    if (m1.profile.rows, m1.profile.cols) != (m2.profile.rows, m2.profile.cols) \
            or m1.schema_id != m2.schema_id:
        return False
    if space.size > bound:
        raise OrbitBoundExceeded(f"state space {space.size} exceeds bound {bound}")
    target = state_of(m2, space)
    return target in _expand_orbit(state_of(m1, space), gens)


def search_orbit(m: BlockMatrix, predicate, bound: int = DEFAULT_BOUND):
    """BFS the orbit until ``predicate(matrix)`` holds; returns
    (matrix, move log from m) or None.  Used as the reducer's fallback."""
    space, gens = compile_generators(m.schema_id, m.profile)
    if space.size > bound:
        raise OrbitBoundExceeded(f"state space {space.size} exceeds bound {bound}")
    start = state_of(m, space)
    back: dict = {start: None}
    queue = [start]
    qi = 0
    while qi < len(queue):
        state = queue[qi]
        qi += 1
        mat = matrix_of_state(space, state)
        if predicate(mat):
            log = []
            cur = state
            while back[cur] is not None:
                prev, mv = back[cur]
                log.append(mv)
                cur = prev
            log.reverse()
            return mat, log
        for gen, mv in gens:
            ns = gen(state)
            if ns not in back:
                back[ns] = (state, mv)
                queue.append(ns)
    return None


@dataclass(frozen=True)
class OrbitInfo:
    size: int
    representative: BlockMatrix
    indecomposable: bool
    is_zero: bool


@dataclass(frozen=True)
class OrbitReport:
    schema_id: SchemaId
    profile: StripProfile
    total_states: int
    orbits: tuple[OrbitInfo, ...]

    @property
    def orbit_count(self) -> int:
        return len(self.orbits)

    @property
    def nonzero_orbit_count(self) -> int:
        return sum(1 for o in self.orbits if not o.is_zero)

    @property
    def indecomposable_nonzero_count(self) -> int:
        return sum(1 for o in self.orbits if o.indecomposable and not o.is_zero)


def count_orbits(profile: StripProfile, schema_id: SchemaId,
                 bound: int = DEFAULT_BOUND) -> OrbitReport:
    """Partition the whole state space of a profile into orbits.

    Each orbit carries its size, its canonical representative (the member
    with the minimal digest of the canonical state encoding), and an
    indecomposability flag (no member's incidence graph splits).
    """
    space, gens = compile_generators(schema_id, profile)
    if space.size > bound:
        raise OrbitBoundExceeded(f"state space {space.size} exceeds bound {bound}")
    ranges = []
    for _rs, _cs, mod, nr, nc, _off in space.cells:
        ranges.extend([range(mod)] * (nr * nc))
    n_verts = space.profile.total_rows + space.profile.total_cols
    assigned: set = set()
    infos = []
    for state in product(*ranges) if ranges else [()]:
        if state in assigned:
            continue
        members = _expand_orbit(state, gens)
        assigned |= members
        rep = min(members, key=_digest)
        splits = n_verts >= 2 and any(_components(space, s) >= 2 for s in members)
        is_zero = not any(state)
        infos.append(OrbitInfo(len(members), matrix_of_state(space, rep),
                               not splits, is_zero))
    return OrbitReport(schema_id, profile, space.size, tuple(infos))


def is_decomposable(m: BlockMatrix, bound: int = DEFAULT_BOUND) -> bool:
    """True iff some orbit member is block-diagonal for a nontrivial split
    (zero rows/columns split off as well)."""
    space, gens = compile_generators(m.schema_id, m.profile)
    if space.size > bound:
        raise OrbitBoundExceeded(f"state space {space.size} exceeds bound {bound}")
    n_verts = m.profile.total_rows + m.profile.total_cols
    if n_verts < 2:
        return False
    states = _expand_orbit(state_of(m, space), gens)
    return any(_components(space, s) >= 2 for s in states)
