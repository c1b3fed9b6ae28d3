"""Constructive decomposition into catalog normal forms.

Stage 1 (structural): admissible reductions drive the matrix toward a
union of small islands.  For every pair of entries an admissible addition
connects, the target entry is replaced by its minimal representative
modulo the subgroup the source can reach; stuck clumps are finished by a
bounded search inside their own orbit (with a deterministic perturb-and-
resweep loop for clumps whose orbit is too large to enumerate).

Stage 2 (canonical): decompositions in this problem are not unique -- a
Moore hook can migrate between summands, the 3-primary residue of a value
can re-associate, and spare lines let values twist by units.  decompose
therefore normalizes the multiset pairwise: for every pair of parts the
least equivalent catalog multiset on the pair's subprofile is computed
and realized.  Equivalence of full matrices is decided through the
2-/3-primary split: M and N are isomorphic iff for some assignment of
signs to lines both primary parts become isomorphic under the
sign-restricted groups; the witnessing primary transformations are adds
only, so they lift to full moves with CRT-chosen coefficients.  All
rewrites are applied to the working matrix as ordinary admissible moves,
keeping the certificate exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import gcd

from .catalog import IndecName, catalog_entries, matrix_of
from .crt import merge_parts, split_parts
from .matrix import (
    BlockMatrix,
    StripProfile,
    canonical_hash,
    cell_modulus,
    direct_sum_all,
    validate,
)
from .moves import Move, apply_log, move_instances, mutate_blocks
from .orbit import (build_space, compile_generators, matrix_of_state,
                    orbit_members_np, state_of)
from .schema import SchemaId, StripId, col_order, compose_factor, get_schema, row_order


class ReduceError(RuntimeError):
    """Internal failure to reach a catalog form: an engine or catalog bug."""


@dataclass(frozen=True)
class Decomposition:
    parts: tuple[IndecName, ...]
    certificate: tuple[Move, ...]
    residual_check: bool

    @property
    def nonatom_parts(self) -> tuple[IndecName, ...]:
        return tuple(p for p in self.parts if not p.family.startswith("atom"))


MATCH_BOUND = 400_000
PAIR_BOUND = 150_000
_MAX_SWEEPS = 40
_HOP_TRIES = 400


def _parts_key(parts) -> tuple:
    return tuple(sorted(p.sort_key() for p in parts))


class _Work:
    """Mutable matrix plus the log of every move applied to it."""

    def __init__(self, m: BlockMatrix):
        self.schema_id = m.schema_id
        self.profile = m.profile
        self.blocks = {k: [list(r) for r in b] for k, b in m.blocks.items()}
        cap = 1
        for s, _ in m.profile.rows + m.profile.cols:
            if s.kind == "M3":
                cap = max(cap, s.param)
        self.schema = get_schema(m.schema_id) if m.schema_id.name == "A0" \
            else get_schema(m.schema_id, cap, cap)
        self.rules = {(r.kind, r.src, r.dst): r for r in self.schema.rules}
        self.log: list[Move] = []

    def ent(self, rs: StripId, i: int, cs: StripId, j: int) -> int:
        block = self.blocks.get((rs, cs))
        return 0 if block is None else block[i][j]

    def mod(self, rs: StripId, cs: StripId) -> int:
        return cell_modulus(self.schema_id, rs, cs)

    def do(self, move: Move) -> None:
        rule = self.rules[(move.kind, move.src, move.dst)]
        mutate_blocks(self.blocks, self.schema_id, self.profile, move, rule.mult)
        self.log.append(move)

    def matrix(self) -> BlockMatrix:
        frozen = {k: tuple(tuple(r) for r in b) for k, b in self.blocks.items()}
        return BlockMatrix(self.schema_id, self.profile, frozen)

    def state_key(self):
        return tuple(tuple(tuple(r) for r in self.blocks[k])
                     for k in sorted(self.blocks,
                                     key=lambda kk: (kk[0].token, kk[1].token)))


def _solve_reduction(value: int, coef: int, m: int):
    """Smallest representative of value modulo the subgroup coef generates
    in Z/m, with the coefficient k that reaches it; None if no move helps."""
    c = coef % m
    if value == 0 or c == 0:
        return None
    g = gcd(c, m)
    target = value % g
    if target == value:
        return None
    k = ((target - value) // g * pow(c // g, -1, m // g)) % (m // g)
    return k, target


def _sweep_rows(w: _Work) -> bool:
    changed = False
    cols = w.profile.cols
    for rs, nr in w.profile.rows:
        for i in range(nr):
            for src_cs, snc in cols:
                for j in range(snc):
                    u = w.ent(rs, i, src_cs, j)
                    if u == 0:
                        continue
                    for dst_cs, dnc in cols:
                        rule = w.rules.get(("col_add", src_cs, dst_cs))
                        if rule is None:
                            continue
                        m = w.mod(rs, dst_cs)
                        if m == 0 or w.mod(rs, src_cs) == 0:
                            continue
                        coef = rule.mult * compose_factor(src_cs, dst_cs, rs, False) * u
                        for j2 in range(dnc):
                            if src_cs == dst_cs and j == j2:
                                continue
                            sol = _solve_reduction(w.ent(rs, i, dst_cs, j2), coef, m)
                            if sol is None:
                                continue
                            w.do(Move("col_add", src_cs, dst_cs, j, j2, k=sol[0]))
                            changed = True
    return changed


def _sweep_cols(w: _Work) -> bool:
    changed = False
    rows = w.profile.rows
    for cs, nc in w.profile.cols:
        for j in range(nc):
            for src_rs, snr in rows:
                for i in range(snr):
                    u = w.ent(src_rs, i, cs, j)
                    if u == 0:
                        continue
                    for dst_rs, dnr in rows:
                        rule = w.rules.get(("row_add", src_rs, dst_rs))
                        if rule is None:
                            continue
                        m = w.mod(dst_rs, cs)
                        if m == 0 or w.mod(src_rs, cs) == 0:
                            continue
                        coef = rule.mult * compose_factor(src_rs, dst_rs, cs, True) * u
                        for i2 in range(dnr):
                            if src_rs == dst_rs and i == i2:
                                continue
                            sol = _solve_reduction(w.ent(dst_rs, i2, cs, j), coef, m)
                            if sol is None:
                                continue
                            w.do(Move("row_add", src_rs, dst_rs, i, i2, k=sol[0]))
                            changed = True
    return changed


def _eliminate(w: _Work) -> None:
    seen = {w.state_key()}
    for _ in range(_MAX_SWEEPS):
        changed = _sweep_cols(w)
        changed |= _sweep_rows(w)
        if not changed:
            return
        key = w.state_key()
        if key in seen:
            return
        seen.add(key)


@dataclass
class _Component:
    rows: dict  # StripId -> sorted list of global indices
    cols: dict

    def is_row_atom(self) -> bool:
        return sum(map(len, self.cols.values())) == 0 and \
            sum(map(len, self.rows.values())) == 1

    def is_col_atom(self) -> bool:
        return sum(map(len, self.rows.values())) == 0 and \
            sum(map(len, self.cols.values())) == 1

    def is_atom(self) -> bool:
        return self.is_row_atom() or self.is_col_atom()

    def lines(self):
        out = [("r", s, i) for s, idxs in self.rows.items() for i in idxs]
        out += [("c", s, j) for s, idxs in self.cols.items() for j in idxs]
        return out


def _union_comps(a: _Component, b: _Component) -> _Component:
    rows = {s: sorted(idx) for s, idx in a.rows.items()}
    for s, idx in b.rows.items():
        rows[s] = sorted(rows.get(s, []) + list(idx))
    cols = {s: sorted(idx) for s, idx in a.cols.items()}
    for s, idx in b.cols.items():
        cols[s] = sorted(cols.get(s, []) + list(idx))
    return _Component(rows, cols)


def _components(w: _Work) -> list[_Component]:
    verts = [("r", rs, i) for rs, nr in w.profile.rows for i in range(nr)]
    verts += [("c", cs, j) for cs, nc in w.profile.cols for j in range(nc)]
    parent = {v: v for v in verts}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for (rs, cs), block in w.blocks.items():
        for i, row in enumerate(block):
            for j, x in enumerate(row):
                if x:
                    ra, rb = find(("r", rs, i)), find(("c", cs, j))
                    if ra != rb:
                        parent[ra] = rb
    groups: dict = {}
    for v in verts:
        groups.setdefault(find(v), []).append(v)
    comps = []
    for members in groups.values():
        rows: dict = {}
        cols: dict = {}
        for kind, strip, idx in members:
            (rows if kind == "r" else cols).setdefault(strip, []).append(idx)
        for d in (rows, cols):
            for s in d:
                d[s].sort()
        comps.append(_Component(rows, cols))
    comps.sort(key=_comp_key)
    return comps


def _comp_key(comp: _Component):
    rkeys = [(row_order(s), i) for s, idxs in comp.rows.items() for i in idxs]
    ckeys = [(col_order(s), j) for s, idxs in comp.cols.items() for j in idxs]
    return (min(rkeys + [(99, 99)]), min(ckeys + [(99, 99)]))


def _extract(w: _Work, comp: _Component) -> BlockMatrix:
    rows = [(s, len(idxs)) for s, idxs in comp.rows.items()]
    cols = [(s, len(idxs)) for s, idxs in comp.cols.items()]
    entries = {}
    for rs, ridxs in comp.rows.items():
        for cs, cidxs in comp.cols.items():
            if cell_modulus(w.schema_id, rs, cs) == 0:
                continue
            entries[(rs, cs)] = [[w.ent(rs, gi, cs, gj) for gj in cidxs]
                                 for gi in ridxs]
    return BlockMatrix.build(w.schema_id, rows, cols, entries)


def _globalize(move: Move, comp: _Component) -> Move:
    row_side = move.kind.startswith("row")
    table = comp.rows if row_side else comp.cols
    gi = table[move.src][move.i]
    if move.kind.endswith("scale"):
        return Move(move.kind, move.src, move.dst, gi)
    gj = table[move.dst][move.j]
    return Move(move.kind, move.src, move.dst, gi, gj, k=move.k, neg=move.neg)


@lru_cache(maxsize=None)
def _candidates(schema_id: SchemaId, rows, cols) -> tuple[IndecName, ...]:
    r_cap = max([s.param for s, _ in cols if s.kind == "M3"], default=1)
    s_cap = max([s.param for s, _ in rows if s.kind == "M3"], default=1)
    out = []
    for name in catalog_entries(schema_id, r_cap, s_cap, include_atoms=False):
        mat = matrix_of(name)
        if mat.profile.rows == rows and mat.profile.cols == cols:
            out.append(name)
    return tuple(out)


def _n_components(m: BlockMatrix) -> int:
    verts = [("r", rs, i) for rs, nr in m.profile.rows for i in range(nr)]
    verts += [("c", cs, j) for cs, nc in m.profile.cols for j in range(nc)]
    parent = {v: v for v in verts}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for (rs, cs), block in m.blocks.items():
        for i, row in enumerate(block):
            for j, x in enumerate(row):
                if x:
                    ra, rb = find(("r", rs, i)), find(("c", cs, j))
                    if ra != rb:
                        parent[ra] = rb
    return len({find(v) for v in verts})


def _match_component(sub: BlockMatrix, bound: int):
    """BFS inside the component's orbit until an exact catalog matrix or a
    member with more components shows up; None when the space is too big."""
    cands = _candidates(sub.schema_id, sub.profile.rows, sub.profile.cols)
    space, gens = compile_generators(sub.schema_id, sub.profile)
    if space.size > bound:
        return None
    targets = {state_of(matrix_of(c), space): c for c in cands}
    start = state_of(sub, space)
    back: dict = {start: None}
    queue = [start]
    qi = 0
    while qi < len(queue):
        state = queue[qi]
        qi += 1
        hit = targets.get(state)
        mat = None
        if hit is None:
            mat = matrix_of_state(space, state)
            if _n_components(mat) < 2:
                mat = None
        if hit is not None or mat is not None:
            log = []
            cur = state
            while back[cur] is not None:
                prev, mv = back[cur]
                log.append(mv)
                cur = prev
            log.reverse()
            return ("match", hit, log) if hit is not None else ("split", mat, log)
        for gen, mv in gens:
            ns = gen(state)
            if ns not in back:
                back[ns] = (state, mv)
                queue.append(ns)
    raise ReduceError(
        f"component matches no catalog entry and never splits: {sub!r}")


def _hop_component(w: _Work, comp: _Component) -> bool:
    """Perturb-and-resweep loop for a clump whose orbit is intractable.

    Deterministic per input: the pseudo-random walk is seeded from the
    clump's canonical hash.  Returns True when the clump's component count
    increased (progress); the caller re-runs the global loop.
    """
    import random

    sub = _extract(w, comp)
    base_comps = _n_components(sub)
    rng = random.Random(canonical_hash(sub))
    schema = w.schema
    instances = [mv for mv in move_instances(schema, _sub_profile(comp))
                 if mv.kind.endswith("add") or mv.kind.endswith("scale")]
    if not instances:
        return False
    for _try in range(_HOP_TRIES):
        trial = _Work(_extract(w, comp))
        depth = rng.randint(1, 3)
        for _ in range(depth):
            mv = rng.choice(instances)
            if mv.kind.endswith("add"):
                mv = Move(mv.kind, mv.src, mv.dst, mv.i, mv.j,
                          k=rng.choice([x for x in range(-11, 12) if x]))
            trial.do(mv)
        _eliminate(trial)
        if _n_components(trial.matrix()) > base_comps:
            for mv in trial.log:
                w.do(_globalize(mv, comp))
            return True
    return False


def _sub_profile(comp: _Component) -> StripProfile:
    return StripProfile.make([(s, len(v)) for s, v in comp.rows.items()],
                             [(s, len(v)) for s, v in comp.cols.items()])


def _atom_for(comp: _Component, schema_id: SchemaId) -> IndecName:
    if comp.is_row_atom():
        strip = next(iter(comp.rows))
        return IndecName("atom_row", strip=strip, schema_id=schema_id)
    strip = next(iter(comp.cols))
    return IndecName("atom_col", strip=strip, schema_id=schema_id)


def _scan_named(w: _Work):
    named = []
    for comp in _components(w):
        if comp.is_atom():
            named.append((_atom_for(comp, w.schema_id), comp))
            continue
        sub = _extract(w, comp)
        cands = _candidates(w.schema_id, sub.profile.rows, sub.profile.cols)
        name = next((c for c in cands if sub == matrix_of(c)), None)
        if name is None:
            raise ReduceError(f"component failed to normalize: {sub!r}")
        named.append((name, comp))
    return named


def _structural(w: _Work, bound: int) -> None:
    """Drive the working matrix to a direct sum of exact catalog matrices."""
    _eliminate(w)
    guard = 4 * (w.profile.total_rows + w.profile.total_cols) + 8
    for _round in range(guard):
        comps = _components(w)
        acted = False
        for comp in comps:
            if comp.is_atom():
                continue
            sub = _extract(w, comp)
            cands = _candidates(w.schema_id, sub.profile.rows, sub.profile.cols)
            if any(sub == matrix_of(c) for c in cands):
                continue
            res = _match_component(sub, bound)
            if res is None:
                if not _hop_component(w, comp):
                    raise ReduceError(
                        "clump resists both orbit search and perturbation: "
                        f"{sub!r}")
            else:
                _kind, _payload, log = res
                for mv in log:
                    w.do(_globalize(mv, comp))
            acted = True
            break
        if not acted:
            return
        _eliminate(w)
    raise ReduceError("structural reduction did not settle")


# --- The split-based isomorphism test and canonical pair rewriting ----------

_PLUS2 = SchemaId("Aprime2", True)
_PLUS3 = SchemaId("Aprime3", True)


class _SplitSpaces:
    """Cached state spaces and plus-orbit indexes for one strip profile of
    the main problem, viewed through its 2-/3-primary parts."""

    def __init__(self, profile: StripProfile):
        self.profile = profile
        self.space2 = build_space(_PLUS2, profile)
        self.space3 = build_space(_PLUS3, profile)
        self._reps2: dict = {}
        self._reps3: dict = {}
        self.lines = [("r", s, i) for s, n in profile.rows for i in range(n)]
        self.lines += [("c", s, j) for s, n in profile.cols for j in range(n)]
        self._flips2 = [self._flip_table(self.space2, ln) for ln in self.lines]
        self._flips3 = [self._flip_table(self.space3, ln) for ln in self.lines]

    @staticmethod
    def _flip_table(space, line):
        kind, strip, idx = line
        table = []
        for rs, cs, mod, nr, nc, off in space.cells:
            if kind == "r" and rs == strip:
                for c in range(nc):
                    table.append((off + idx * nc + c, mod))
            elif kind == "c" and cs == strip:
                for r in range(nr):
                    table.append((off + r * nc + idx, mod))
        return tuple(table)

    def orbit_id(self, which: int, state: tuple, cap: int = 60_000):
        """Minimal state of the plus-orbit of ``state``; None when the
        orbit exceeds the exploration cap (memoized either way)."""
        from .orbit import pack_state, space_places

        reps = self._reps2 if which == 2 else self._reps3
        places = space_places(_PLUS2 if which == 2 else _PLUS3,
                              self.profile.rows, self.profile.cols)
        if places is None:
            return None
        key = pack_state(places, state)
        hit = reps.get(key)
        if hit is not None:
            return hit if hit is not False else None
        res = orbit_members_np(_PLUS2 if which == 2 else _PLUS3,
                               self.profile, state, cap)
        if res is None:
            reps[key] = False
            return None
        rep, keys = res
        for k in keys:
            reps[k] = rep
        return rep

    def flip(self, which: int, state: tuple, sign_bits: int) -> tuple:
        tables = self._flips2 if which == 2 else self._flips3
        out = list(state)
        for i, table in enumerate(tables):
            if sign_bits >> i & 1:
                for idx, mod in table:
                    out[idx] = (-out[idx]) % mod
        return tuple(out)


@lru_cache(maxsize=None)
def _split_spaces(rows, cols) -> _SplitSpaces:
    return _SplitSpaces(StripProfile.make(rows, cols))


def _split_states(m: BlockMatrix, spaces: _SplitSpaces):
    two, three = split_parts(m)
    return state_of(two, spaces.space2), state_of(three, spaces.space3)


def full_isomorphic_small(m: BlockMatrix, n: BlockMatrix,
                          bound: int = PAIR_BOUND) -> bool | None:
    """Decide isomorphism of two Aprime matrices on one profile through
    the primary parts; None when the 2-part space exceeds the bound."""
    if (m.profile.rows, m.profile.cols) != (n.profile.rows, n.profile.cols):
        return False
    spaces = _split_spaces(m.profile.rows, m.profile.cols)
    if spaces.space2.size > bound or spaces.space3.size > bound:
        return None
    s2m, s3m = _split_states(m, spaces)
    s2n, s3n = _split_states(n, spaces)
    o2m = spaces.orbit_id(2, s2m)
    o3m = spaces.orbit_id(3, s3m)
    for bits in range(1 << len(spaces.lines)):
        if spaces.orbit_id(2, spaces.flip(2, s2n, bits)) == o2m and \
                spaces.orbit_id(3, spaces.flip(3, s3n, bits)) == o3m:
            return True
    return False


def _plus_path(schema_id: SchemaId, profile: StripProfile, start: tuple,
               goal: tuple) -> list[Move] | None:
    """Move path between two states under the sign-restricted group."""
    space, gens = compile_generators(schema_id, profile)
    if start == goal:
        return []
    back = {start: None}
    queue = [start]
    qi = 0
    while qi < len(queue):
        state = queue[qi]
        qi += 1
        for gen, mv in gens:
            ns = gen(state)
            if ns not in back:
                back[ns] = (state, mv)
                if ns == goal:
                    log = [mv]
                    cur = state
                    while back[cur] is not None:
                        prev, pmv = back[cur]
                        log.append(pmv)
                        cur = prev
                    log.reverse()
                    return log
                queue.append(ns)
    return None


def _lift(log: list[Move], which: int) -> list[Move]:
    """Lift a primary-problem move sequence to full moves acting trivially
    on the other primary part.

    Adds lift with CRT-chosen coefficients; signed swaps are synthesized
    from three adds first.  Scales and plain swaps can only appear on
    Moore lines (the sign restriction spares them), and Moore lines carry
    no 2-primary cells, so those moves lift verbatim.
    """
    flat: list[Move] = []
    for mv in log:
        if mv.kind.endswith("add"):
            flat.append(mv)
        elif mv.kind.endswith("swap") and mv.neg:
            kind = "row_add" if mv.kind.startswith("row") else "col_add"
            i, j = mv.i, mv.j
            if mv.neg == "i":
                # (x_i, x_j) -> (-x_j, x_i)
                flat.append(Move(kind, mv.src, mv.dst, i, j, k=1))
                flat.append(Move(kind, mv.src, mv.dst, j, i, k=-1))
                flat.append(Move(kind, mv.src, mv.dst, i, j, k=1))
            else:
                # (x_i, x_j) -> (x_j, -x_i)
                flat.append(Move(kind, mv.src, mv.dst, j, i, k=1))
                flat.append(Move(kind, mv.src, mv.dst, i, j, k=-1))
                flat.append(Move(kind, mv.src, mv.dst, j, i, k=1))
        elif which == 3 and mv.src.kind == "M3" and \
                (mv.kind.endswith("scale") or mv.kind.endswith("swap")):
            flat.append(mv)
        else:
            raise ReduceError(f"cannot lift move {mv!r}")
    out = []
    for mv in flat:
        if not mv.kind.endswith("add"):
            out.append(mv)
            continue
        if which == 2:
            k = next(x for x in (mv.k % 8 + 8 * t for t in range(3))
                     if x % 3 == 0)
        else:
            k = 16 * (mv.k % 3)  # 16 = 0 mod 8, 1 mod 3
        if k:
            out.append(Move(mv.kind, mv.src, mv.dst, mv.i, mv.j, k=k))
    return out


def _sign_moves(spaces: _SplitSpaces, bits: int) -> list[Move]:
    out = []
    for i, (kind, strip, idx) in enumerate(spaces.lines):
        if bits >> i & 1:
            out.append(Move("row_scale" if kind == "r" else "col_scale",
                            strip, strip, idx))
    return out


@lru_cache(maxsize=None)
def _multisets_for_profile(schema_id: SchemaId, rows, cols) -> tuple:
    """Every catalog multiset (parts plus atoms) whose direct sum has
    exactly this profile, sorted by multiset key."""
    r_cap = max([s.param for s, _ in cols if s.kind == "M3"], default=1)
    s_cap = max([s.param for s, _ in rows if s.kind == "M3"], default=1)
    want_r = {s: d for s, d in rows}
    want_c = {s: d for s, d in cols}
    pool = []
    for name in catalog_entries(schema_id, r_cap, s_cap, include_atoms=False):
        profile = matrix_of(name).profile
        if all(want_r.get(s, 0) >= d for s, d in profile.rows) and \
                all(want_c.get(s, 0) >= d for s, d in profile.cols):
            pool.append((name, profile))

    results = []

    def rec(start, rem_r, rem_c, acc):
        atoms = []
        for s, d in rem_r.items():
            atoms += [IndecName("atom_row", strip=s, schema_id=schema_id)] * d
        for s, d in rem_c.items():
            atoms += [IndecName("atom_col", strip=s, schema_id=schema_id)] * d
        results.append(tuple(acc + atoms))
        for idx in range(start, len(pool)):
            name, profile = pool[idx]
            if all(rem_r.get(s, 0) >= d for s, d in profile.rows) and \
                    all(rem_c.get(s, 0) >= d for s, d in profile.cols):
                nr = dict(rem_r)
                nc = dict(rem_c)
                for s, d in profile.rows:
                    nr[s] -= d
                for s, d in profile.cols:
                    nc[s] -= d
                rec(idx, nr, nc, acc + [name])

    rec(0, want_r, want_c, [])
    uniq = {_parts_key(ms): ms for ms in results}
    return tuple(uniq[k] for k in sorted(uniq))


def _flip_closure(spaces: _SplitSpaces, s2: tuple, s3: tuple):
    """Orbit pairs reachable from (s2, s3) by line-sign flips, with flip
    bits realizing each; None when an orbit exploration blows its cap.

    Flips normalize the sign-restricted groups, so they act on orbits;
    the closure is tiny compared to the 2^lines sign vectors.
    """
    o2 = spaces.orbit_id(2, s2)
    o3 = spaces.orbit_id(3, s3)
    if o2 is None or o3 is None:
        return None
    out = {(o2, o3): 0}
    queue = [(o2, o3, 0)]
    qi = 0
    while qi < len(queue):
        r2, r3, bits = queue[qi]
        qi += 1
        for i in range(len(spaces.lines)):
            n2 = spaces.orbit_id(2, spaces.flip(2, r2, 1 << i))
            n3 = spaces.orbit_id(3, spaces.flip(3, r3, 1 << i))
            if n2 is None or n3 is None:
                return None
            if (n2, n3) not in out:
                nb = bits ^ (1 << i)
                out[(n2, n3)] = nb
                queue.append((n2, n3, nb))
    return out


@lru_cache(maxsize=None)
def _candidate_states(schema_id: SchemaId, rows, cols, ms):
    """Split states and plus-orbit ids of one assembled candidate."""
    spaces = _split_spaces(rows, cols)
    target = direct_sum_all(schema_id,
                            [matrix_of(p) for p in sorted(ms, key=IndecName.sort_key)])
    if (target.profile.rows, target.profile.cols) != (rows, cols):
        return None
    t2, t3 = _split_states(target, spaces)
    o2 = spaces.orbit_id(2, t2)
    o3 = spaces.orbit_id(3, t3)
    if o2 is None or o3 is None:
        return None
    return target, (t2, t3), (o2, o3)


def _canonical_multiset_for(m: BlockMatrix, stop_key=None):
    """Least catalog multiset isomorphic to m (profile-exact), or None if
    an orbit exploration blows the cap.  Candidates with multiset key >=
    ``stop_key`` are not examined.

    Flips are enumerated once on m's side: m = flip(g.N, bits) for plus
    transformations g iff flip(m, bits) and N share their primary orbits.
    """
    if m.schema_id.name != "Aprime":
        return None
    worth = [ms for ms in _multisets_for_profile(m.schema_id, m.profile.rows,
                                                 m.profile.cols)
             if stop_key is None or _parts_key(ms) < stop_key]
    if not worth:
        return None
    spaces = _split_spaces(m.profile.rows, m.profile.cols)
    s2, s3 = _split_states(m, spaces)
    closure = _flip_closure(spaces, s2, s3)
    if closure is None:
        return None
    for ms in worth:
        cand = _candidate_states(m.schema_id, m.profile.rows, m.profile.cols, ms)
        if cand is None:
            continue
        target, tstates, key_t = cand
        bits = closure.get(key_t)
        if bits is not None:
            return ms, target, tstates, bits, spaces
    if stop_key is not None:
        return None
    raise ReduceError(f"no catalog multiset matches {m!r}")


def _realize_target(w: _Work, comp: _Component, sub: BlockMatrix, target,
                    tstates, bits, spaces) -> None:
    """Transform the component into the exact target matrix: primary-part
    paths are found in the small split spaces, lifted to full moves, and
    finished with the sign flips."""
    s2, s3 = _split_states(sub, spaces)
    goal2 = spaces.flip(2, tstates[0], bits)
    goal3 = spaces.flip(3, tstates[1], bits)
    path2 = _plus_path(_PLUS2, spaces.profile, s2, goal2)
    path3 = _plus_path(_PLUS3, spaces.profile, s3, goal3)
    if path2 is None or path3 is None:
        raise ReduceError("split paths missing for a verified isomorphism")
    log = _lift(path2, 2) + _lift(path3, 3) + _sign_moves(spaces, bits)
    for mv in log:
        w.do(_globalize(mv, comp))
    if _extract(w, comp) != target:
        raise ReduceError("lifted rewrite did not land on its target")


# Moore-hook placement: 2-move transfer/exchange macros with CRT-chosen
# coefficients, used for host pairs whose orbit search is out of reach.

_S_N3 = StripId("S_n3")


def _host_row_strip_of(name: IndecName) -> StripId:
    if name.family in ("eta_v_eta", "eta_v_etaeta", "eta_v", "eta_a"):
        return StripId("C_eta")
    if name.family == "eta2":
        return StripId("S_n2")
    if name.family == "etaeta1":
        return StripId("S_n1")
    return StripId("S_n")


def _can_take(name: IndecName, deco: str) -> bool:
    from .catalog import CatalogError, _check_name

    if name.family.startswith("atom") or name.family in ("a", "eta_a"):
        return False
    if (deco == "r" and name.r is not None) or (deco == "s" and name.s is not None):
        return False
    trial = IndecName(name.family, v=name.v,
                      r=1 if deco == "r" else name.r,
                      s=1 if deco == "s" else name.s,
                      schema_id=name.schema_id)
    try:
        _check_name(trial)
        return True
    except CatalogError:
        return False


def _k_crt(mod3: int, even_mods) -> int:
    m2 = 1
    for m in even_mods:
        if m % 3 == 0:
            raise ReduceError("hook constraint not coprime to 3")
        m2 = m2 * m // gcd(m2, m)
    for t in range(1, 4):
        if (t * m2 - mod3) % 3 == 0:
            return t * m2
    raise ReduceError("no CRT coefficient")


def _col_junk_mods(w: _Work, comp: _Component, q: int, skip_rows) -> list:
    mods = []
    for rs, idxs in comp.rows.items():
        m = w.mod(rs, _S_N3)
        if m == 0:
            continue
        for i in idxs:
            if (rs, i) in skip_rows:
                continue
            val = w.ent(rs, i, _S_N3, q)
            if val:
                mods.append(m // gcd(val, m))
    return mods


def _row_junk_mods(w: _Work, comp: _Component, src: StripId, dst: StripId,
                   row: int, skip_cols) -> list:
    """k = 0 (mod m) constraints so that row_add(src row -> dst) carries no
    junk out of the source part's row onto the named columns."""
    rule = w.rules[("row_add", src, dst)]
    mods = []
    for cs, idxs in comp.cols.items():
        m = w.mod(dst, cs)
        if m == 0 or w.mod(src, cs) == 0:
            continue
        coef0 = rule.mult * compose_factor(src, dst, cs, True)
        for j in idxs:
            if (cs, j) in skip_cols:
                continue
            val = w.ent(src, row, cs, j)
            if val:
                c = (coef0 * val) % m
                if c:
                    mods.append(m // gcd(c, m))
    return mods


class _Site:
    """One place a Moore hook sits: a host part or a free-standing form."""

    def __init__(self, name, comp, param):
        self.name = name
        self.comp = comp
        self.param = param

    def q_col(self) -> int:
        return self.comp.cols[_S_N3][0]

    def s_row(self):
        strip = StripId("M3", self.param)
        return strip, self.comp.rows[strip][0]

    def r_col(self):
        strip = StripId("M3", self.param)
        return strip, self.comp.cols[strip][0]

    def host_row(self):
        strip = _host_row_strip_of(self.name)
        return strip, self.comp.rows[strip][0]


def _v1_transfer(w: _Work, src: _Site, dst_comp: _Component, dst_q: int) -> None:
    e = src.s_row()
    q_s = src.q_col()
    k1 = _k_crt(1, _col_junk_mods(w, src.comp, q_s, {e}))
    w.do(Move("col_add", _S_N3, _S_N3, q_s, dst_q, k=k1))
    k2 = _k_crt(2, _col_junk_mods(w, dst_comp, dst_q, {e}))
    w.do(Move("col_add", _S_N3, _S_N3, dst_q, q_s, k=k2))


def _v1_exchange(w: _Work, a: _Site, b: _Site) -> None:
    ea, eb = a.s_row(), b.s_row()
    q_a, q_b = a.q_col(), b.q_col()
    k1 = _k_crt(1, _col_junk_mods(w, a.comp, q_a, {ea}))
    w.do(Move("col_add", _S_N3, _S_N3, q_a, q_b, k=k1))
    k2 = _k_crt(2, _col_junk_mods(w, b.comp, q_b, {ea, eb}))
    w.do(Move("col_add", _S_N3, _S_N3, q_b, q_a, k=k2))
    k3 = _k_crt(1, _col_junk_mods(w, a.comp, q_a, {ea, eb}))
    w.do(Move("col_add", _S_N3, _S_N3, q_a, q_b, k=k3))
    if w.ent(eb[0], eb[1], _S_N3, q_a) != 1:
        w.do(Move("row_scale", eb[0], eb[0], eb[1]))


def _mod3_target(w: _Work, src: StripId, dst: StripId, want: int) -> int:
    """Residue of k (mod 3) so that row_add(src->dst, k) carries ``want``
    times the source's unit hook (the f-rule out of C_eta doubles)."""
    mult = w.rules[("row_add", src, dst)].mult % 3
    return (want * pow(mult, -1, 3)) % 3


def _vr_transfer(w: _Work, src: _Site, dst_strip: StripId, dst_row: int,
                 dst_comp: _Component) -> None:
    m_cell = src.r_col()
    hs_strip, hs_row = src.host_row()
    k1 = _k_crt(_mod3_target(w, hs_strip, dst_strip, 1),
                _row_junk_mods(w, src.comp, hs_strip, dst_strip, hs_row, {m_cell}))
    w.do(Move("row_add", hs_strip, dst_strip, hs_row, dst_row, k=k1))
    k2 = _k_crt(_mod3_target(w, dst_strip, hs_strip, 2),
                _row_junk_mods(w, dst_comp, dst_strip, hs_strip, dst_row, {m_cell}))
    w.do(Move("row_add", dst_strip, hs_strip, dst_row, hs_row, k=k2))


def _vr_exchange(w: _Work, a: _Site, b: _Site) -> None:
    ma, mb = a.r_col(), b.r_col()
    ha_strip, ha_row = a.host_row()
    hb_strip, hb_row = b.host_row()
    # carry a's hook onto b's row, pull b's hook back, clear the leftovers
    k1 = _k_crt(_mod3_target(w, ha_strip, hb_strip, 1),
                _row_junk_mods(w, a.comp, ha_strip, hb_strip, ha_row, {ma}))
    w.do(Move("row_add", ha_strip, hb_strip, ha_row, hb_row, k=k1))
    k2 = _k_crt(_mod3_target(w, hb_strip, ha_strip, 2),
                _row_junk_mods(w, b.comp, hb_strip, ha_strip, hb_row, {ma, mb}))
    w.do(Move("row_add", hb_strip, ha_strip, hb_row, ha_row, k=k2))
    k3 = _k_crt(_mod3_target(w, ha_strip, hb_strip, 1),
                _row_junk_mods(w, a.comp, ha_strip, hb_strip, ha_row, {ma, mb}))
    w.do(Move("row_add", ha_strip, hb_strip, ha_row, hb_row, k=k3))
    if w.ent(ha_strip, ha_row, mb[0], mb[1]) != 1:
        w.do(Move("col_scale", mb[0], mb[0], mb[1]))
    if w.ent(hb_strip, hb_row, ma[0], ma[1]) != 1:
        w.do(Move("col_scale", ma[0], ma[0], ma[1]))


def _with_deco(name: IndecName, deco: str, param) -> IndecName:
    return IndecName(name.family, v=name.v,
                     r=param if deco == "r" else name.r,
                     s=param if deco == "s" else name.s,
                     schema_id=name.schema_id)


def _hook_sites(w: _Work, kind: str):
    """Hosts and free-standing sites for one hook kind: 'vr' pools all
    superscript hooks (they migrate across host types through the f-rule
    additions), 'v1' the subscript hooks."""
    named = _scan_named(w)
    deco = "s" if kind == "v1" else "r"
    hosts = []
    alone = []
    for name, comp in named:
        if name.family in ("a", "eta_a"):
            if kind == "v1" and name.family == "a" and name.s and not name.r:
                alone.append(_Site(name, comp, name.s))
            elif kind == "vr" and name.family == "a" and name.r and not name.s:
                alone.append(_Site(name, comp, name.r))
            elif kind == "vr" and name.family == "eta_a":
                alone.append(_Site(name, comp, name.r))
            continue
        if name.family.startswith("atom"):
            continue
        current = name.s if deco == "s" else name.r
        stripped = IndecName(name.family, v=name.v,
                             r=None if deco == "r" else name.r,
                             s=None if deco == "s" else name.s,
                             schema_id=name.schema_id)
        if current is not None or _can_take(name, deco):
            hosts.append((_Site(name, comp, current), stripped))
    return hosts, alone


def _host_identity(site: _Site, stripped: IndecName):
    anchors = [("r", row_order(st), idx) for st, idxs in site.comp.rows.items()
               for idx in idxs if st.kind != "M3"]
    anchors += [("c", col_order(st), idx) for st, idxs in site.comp.cols.items()
                for idx in idxs if st.kind != "M3"]
    return (stripped.sort_key(), min(anchors))


def _hook_pass(w: _Work, kind: str) -> bool:
    """Key-minimizing placement of one hook kind over its hosts."""
    from itertools import permutations

    hosts, alone = _hook_sites(w, kind)
    deco = "s" if kind == "v1" else "r"
    if not hosts:
        return False
    hosted_params = [h.param for h, _ in hosts if h.param is not None]
    if not hosted_params and not alone:
        return False
    best = None
    slots = list(range(len(hosts)))
    for attach in range(len(alone) + 1):
        for picked in combinations(range(len(alone)), attach):
            place = sorted(hosted_params + [alone[i].param for i in picked])
            if len(place) > len(hosts):
                continue
            for assign in permutations(slots, len(place)):
                key_parts = []
                for idx, (site, stripped) in enumerate(hosts):
                    p = None
                    for ci, slot in enumerate(assign):
                        if slot == idx:
                            p = place[ci]
                    key_parts.append(_with_deco(stripped, deco, p) if p
                                     else stripped)
                for i in range(len(alone)):
                    if i not in picked:
                        key_parts.append(alone[i].name)
                cand = (_parts_key(key_parts), picked, assign, tuple(place))
                if best is None or cand[0] < best[0]:
                    best = cand
    current_names = [(_with_deco(st, deco, site.param) if site.param else st)
                     for site, st in hosts] + [s.name for s in alone]
    if best is None or best[0] >= _parts_key(current_names):
        return False
    _key, _picked, assign, place = best
    want = {}
    for ci, slot in enumerate(assign):
        site, stripped = hosts[slot]
        want[_host_identity(site, stripped)] = place[ci]
    for _round in range(16):
        hosts2, alone2 = _hook_sites(w, kind)
        done = True
        for site, stripped in hosts2:
            target = want.get(_host_identity(site, stripped))
            if site.param == target:
                continue
            done = False
            if target is None:
                continue  # its hook is pulled away by another step
            src = next((s for s in alone2 if s.param == target), None)
            if src is None:
                src = next((h for h, hst in hosts2
                            if h is not site and h.param == target
                            and want.get(_host_identity(h, hst)) != target), None)
            if src is None:
                return False
            if site.param is None:
                if kind == "v1":
                    _v1_transfer(w, src, site.comp, site.q_col())
                else:
                    strip, row = site.host_row()
                    _vr_transfer(w, src, strip, row, site.comp)
            else:
                if kind == "v1":
                    _v1_exchange(w, site, src)
                else:
                    _vr_exchange(w, site, src)
            break
        if done:
            return True
    raise ReduceError("hook placement did not settle")


_CLEAN_GROUPS: set = set()


def _pairwise_canonicalize(w: _Work, max_group: int = 3) -> None:
    """Normalize the multiset: Moore-hook placement first, then replace
    every small group of parts by the least equivalent catalog multiset
    of the group's subprofile, to a fixpoint.

    A group of exact catalog parts is determined up to line permutation
    by its multiset, so groups once found canonical are cached globally.
    """
    if w.schema_id.name != "Aprime":
        return
    for _round in range(96):
        changed = False
        for kind in ("vr", "v1"):
            while _hook_pass(w, kind):
                changed = True
        named = _scan_named(w)
        for size in range(2, max_group + 1):
            for group in combinations(named, size):
                gkey = _parts_key([n for n, _c in group])
                if gkey in _CLEAN_GROUPS:
                    continue
                comp = group[0][1]
                for _n, c in group[1:]:
                    comp = _union_comps(comp, c)
                sub = _extract(w, comp)
                res = _canonical_multiset_for(sub, stop_key=gkey)
                if res is None:
                    _CLEAN_GROUPS.add(gkey)
                    continue
                ms, target, tstates, bits, spaces = res
                _realize_target(w, comp, sub, target, tstates, bits, spaces)
                changed = True
                break
            if changed:
                break
        if not changed:
            return
    raise ReduceError("multiset normalization did not settle")


def decompose(m: BlockMatrix, bound: int = MATCH_BOUND) -> Decomposition:
    """Reduce a valid matrix to a canonical direct sum of catalog entries.

    The certificate replays on the input to exactly the direct sum, in
    catalog order, of the named parts.
    """
    problem = validate(m)
    if problem is not None:
        raise ValueError(problem)
    w = _Work(m)
    _structural(w, bound)
    _pairwise_canonicalize(w)
    named = _scan_named(w)
    named.sort(key=lambda nc: (nc[0].sort_key(), _comp_key(nc[1])))
    parts = tuple(name for name, _ in named)
    _arrange(w, named)
    assembled = direct_sum_all(m.schema_id, [matrix_of(p) for p in parts])
    if w.matrix() != assembled:
        _repair(w, named)
    if w.matrix() != assembled:
        raise ReduceError("assembly failed to reproduce the catalog layout")
    d = Decomposition(parts, tuple(w.log), True)
    if not verify_certificate(m, d):
        raise ReduceError("certificate replay mismatch")
    return d


def _arrange(w: _Work, named) -> None:
    """Permute rows/columns within strips so parts sit in catalog order."""
    for axis, _order in (("r", row_order), ("c", col_order)):
        strips = w.profile.rows if axis == "r" else w.profile.cols
        for strip, dim in strips:
            if dim < 2:
                continue
            want: list[int] = []
            for _name, comp in named:
                table = comp.rows if axis == "r" else comp.cols
                want.extend(table.get(strip, ()))
            pos = list(range(dim))  # pos[slot] = original index now here
            for t in range(dim):
                cur = pos.index(want[t])
                if cur == t:
                    continue
                kind = "row_swap" if axis == "r" else "col_swap"
                rule = w.rules[(kind, strip, strip)]
                neg = "j" if rule.signed_swap else ""
                w.do(Move(kind, strip, strip, min(t, cur), max(t, cur), neg=neg))
                pos[t], pos[cur] = pos[cur], pos[t]
            for _name, comp in named:
                table = comp.rows if axis == "r" else comp.cols
                if strip in table:
                    table[strip] = sorted(pos.index(g) for g in table[strip])


def _try_align(w: _Work, name: IndecName, comp: _Component) -> bool:
    if name.family.startswith("atom"):
        return True
    sub = _extract(w, comp)
    target = matrix_of(name)
    if sub == target:
        return True
    space, gens = compile_generators(sub.schema_id, sub.profile)
    goal = state_of(target, space)
    start = state_of(sub, space)
    back: dict = {start: None}
    queue = [start]
    qi = 0
    while qi < len(queue):
        state = queue[qi]
        qi += 1
        if state == goal:
            log = []
            cur = state
            while back[cur] is not None:
                prev, mv = back[cur]
                log.append(mv)
                cur = prev
            log.reverse()
            for mv in log:
                w.do(_globalize(mv, comp))
            return True
        for gen, mv in gens:
            ns = gen(state)
            if ns not in back:
                back[ns] = (state, mv)
                queue.append(ns)
    return False


def _repair(w: _Work, named) -> None:
    """Fix sign leftovers that signed arrangement swaps deposit on parts:
    realign each part inside its own orbit; push a stray sign onto a
    neighbouring line (double signed swap) when a part is sign-rigid."""
    for _round in range(6):
        failed = [(name, comp) for name, comp in named
                  if not _try_align(w, name, comp)]
        if not failed:
            return
        name, comp = failed[0]
        moved = False
        for axis in ("r", "c"):
            table = comp.rows if axis == "r" else comp.cols
            for strip, idxs in table.items():
                dim = (w.profile.row_dim(strip) if axis == "r"
                       else w.profile.col_dim(strip))
                if dim < 2:
                    continue
                other = next(x for x in range(dim) if x != idxs[0])
                kind = "row_swap" if axis == "r" else "col_swap"
                rule = w.rules[(kind, strip, strip)]
                neg = "j" if rule.signed_swap else ""
                mv = Move(kind, strip, strip, min(idxs[0], other),
                          max(idxs[0], other), neg=neg)
                w.do(mv)
                w.do(mv)
                moved = True
                break
            if moved:
                break
        if not moved:
            raise ReduceError(f"part {name} cannot be aligned with its normal form")
    failed = [(name, comp) for name, comp in named if not _try_align(w, name, comp)]
    if failed:
        raise ReduceError(f"parts {[n for n, _ in failed]} cannot be aligned")


def verify_certificate(m: BlockMatrix, d: Decomposition) -> bool:
    """Replay the certificate and compare with the assembled direct sum."""
    try:
        replayed = apply_log(m, d.certificate)
    except Exception:
        return False
    assembled = direct_sum_all(m.schema_id, [matrix_of(p) for p in d.parts])
    return replayed == assembled


def isomorphic(m1: BlockMatrix, m2: BlockMatrix, bound: int = MATCH_BOUND) -> bool:
    """True iff the matrices decompose to one canonical multiset."""
    if m1.schema_id != m2.schema_id:
        raise ValueError("isomorphic expects matrices of one schema")
    p1 = _parts_key(decompose(m1, bound).parts)
    p2 = _parts_key(decompose(m2, bound).parts)
    return p1 == p2


def crt_decompose(m: BlockMatrix, bound: int = MATCH_BOUND) -> Decomposition:
    """Decompose an Aprime matrix through its 2-/3-primary parts.

    The parts are reduced separately under the sign-restricted groups,
    merged back entrywise, and the merged matrix is finished under the
    full group.  The certificate is taken from the direct reduction of
    the input (the split/merge itself is not a move sequence); the parts
    must agree with the direct path, and a disagreement is an internal
    error.
    """
    if m.schema_id.name != "Aprime":
        raise ValueError("crt_decompose expects an Aprime matrix")
    two, three = split_parts(m, plus=True)
    d2 = decompose(two, bound)
    d3 = decompose(three, bound)
    n2 = apply_log(two, d2.certificate)
    n3 = apply_log(three, d3.certificate)
    merged = merge_parts(n2, n3)
    d_merged = decompose(merged, bound)
    direct = decompose(m, bound)
    if _parts_key(d_merged.parts) != _parts_key(direct.parts):
        raise ReduceError("CRT pipeline disagrees with the direct reduction")
    return Decomposition(direct.parts, direct.certificate, direct.residual_check)
