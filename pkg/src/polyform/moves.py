"""Application of admissible moves to block matrices.

A Move is one concrete instance of a MoveRule: the strips, the line
indices, and the free coefficient.  Additions act on every affected cell
through the composite arithmetic: the source entry is carried into the
destination cell's ring, picking up the rule's coefficient restriction
(2k / 6k) and the +12 lifting of Z/2 entries into Z/24 cells.  Cells
tabulated zero are never written.

Move logs are replayable isomorphism certificates; every move has an
explicit inverse.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .matrix import BlockMatrix, StripProfile, cell_modulus
from .schema import MoveRule, Schema, SchemaId, StripId, compose_factor, get_schema


class MoveError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Move:
    """One admissible transformation instance.

    For adds: line ``i`` of ``src`` is added (``mult * k`` times, with
    composite arithmetic) into line ``j`` of ``dst``.  For scales: line
    ``i`` of ``src`` is negated.  For swaps: lines ``i`` and ``j`` are
    transposed, and ``neg`` ('' / 'i' / 'j') names the position whose
    content is negated afterwards (signed swaps).
    """

    kind: str
    src: StripId
    dst: StripId
    i: int
    j: int = 0
    k: int = 0
    neg: str = ""


def find_rule(schema: Schema, move: Move) -> MoveRule:
    for rule in schema.rules:
        if rule.kind != move.kind or rule.src != move.src or rule.dst != move.dst:
            continue
        if move.kind.endswith("swap"):
            if rule.signed_swap and move.neg not in ("i", "j"):
                raise MoveError(f"{move.kind} on {move.src} must be a signed swap here")
            if not rule.signed_swap and move.neg and not _scale_allowed(schema, move):
                raise MoveError("signed swap not available without scaling")
        return rule
    raise MoveError(f"no admissible rule for {move}")


def _scale_allowed(schema: Schema, move: Move) -> bool:
    scale_kind = "row_scale" if move.kind.startswith("row") else "col_scale"
    return any(r.kind == scale_kind and r.src == move.src for r in schema.rules)


def _check_indices(profile: StripProfile, move: Move) -> None:
    row_side = move.kind.startswith("row")
    dim_of = profile.row_dim if row_side else profile.col_dim
    si, di = dim_of(move.src), dim_of(move.dst)
    if not 0 <= move.i < si:
        raise MoveError(f"index i={move.i} out of range for {move.src}")
    if move.kind.endswith("add") or move.kind.endswith("swap"):
        if not 0 <= move.j < di:
            raise MoveError(f"index j={move.j} out of range for {move.dst}")
        if move.src == move.dst and move.i == move.j:
            raise MoveError("source and destination line coincide")


def _schema_for(m: BlockMatrix) -> Schema:
    cap = 1
    for s, _ in m.profile.rows + m.profile.cols:
        if s.kind == "M3":
            cap = max(cap, s.param)
    return get_schema(m.schema_id, cap, cap) if m.schema_id.name != "A0" \
        else get_schema(m.schema_id)


def _mutable_blocks(m: BlockMatrix) -> dict:
    return {key: [list(row) for row in block] for key, block in m.blocks.items()}


def _freeze(m: BlockMatrix, blocks: dict) -> BlockMatrix:
    frozen = {key: tuple(tuple(row) for row in block) for key, block in blocks.items()}
    return BlockMatrix(m.schema_id, m.profile, frozen)


def mutate_blocks(blocks: dict, schema_id: SchemaId, profile: StripProfile,
                  move: Move, mult: int) -> None:
    """Apply a checked move in place on mutable nested-list blocks."""
    row_side = move.kind.startswith("row")
    axis = profile.cols if row_side else profile.rows

    if move.kind.endswith("add"):
        for strip, _dim in axis:
            if row_side:
                dst_m = cell_modulus(schema_id, move.dst, strip)
                src_m = cell_modulus(schema_id, move.src, strip)
            else:
                dst_m = cell_modulus(schema_id, strip, move.dst)
                src_m = cell_modulus(schema_id, strip, move.src)
            if dst_m == 0 or src_m == 0:
                continue
            coef = mult * compose_factor(move.src, move.dst, strip, row_side) * move.k
            if row_side:
                srow = blocks[(move.src, strip)][move.i]
                drow = blocks[(move.dst, strip)][move.j]
                for c in range(len(drow)):
                    drow[c] = (drow[c] + coef * srow[c]) % dst_m
            else:
                sblock = blocks[(strip, move.src)]
                dblock = blocks[(strip, move.dst)]
                for r in range(len(dblock)):
                    dblock[r][move.j] = (dblock[r][move.j] + coef * sblock[r][move.i]) % dst_m
        return

    if move.kind.endswith("scale"):
        for strip, _dim in axis:
            key = (move.src, strip) if row_side else (strip, move.src)
            ring = cell_modulus(schema_id, *key)
            if ring == 0:
                continue
            block = blocks[key]
            if row_side:
                row = block[move.i]
                for c in range(len(row)):
                    row[c] = (-row[c]) % ring
            else:
                for r in range(len(block)):
                    block[r][move.i] = (-block[r][move.i]) % ring
        return

    # swaps
    for strip, _dim in axis:
        key = (move.src, strip) if row_side else (strip, move.src)
        ring = cell_modulus(schema_id, *key)
        if ring == 0:
            continue
        block = blocks[key]
        if row_side:
            block[move.i], block[move.j] = block[move.j], block[move.i]
            if move.neg:
                pos = move.i if move.neg == "i" else move.j
                row = block[pos]
                for c in range(len(row)):
                    row[c] = (-row[c]) % ring
        else:
            for r in range(len(block)):
                block[r][move.i], block[r][move.j] = block[r][move.j], block[r][move.i]
            if move.neg:
                pos = move.i if move.neg == "i" else move.j
                for r in range(len(block)):
                    block[r][pos] = (-block[r][pos]) % ring


def apply_move(m: BlockMatrix, move: Move) -> BlockMatrix:
    """Apply one admissible move; returns a new valid matrix."""
    schema = _schema_for(m)
    rule = find_rule(schema, move)
    _check_indices(m.profile, move)
    blocks = _mutable_blocks(m)
    mutate_blocks(blocks, m.schema_id, m.profile, move, rule.mult)
    return _freeze(m, blocks)


def apply_log(m: BlockMatrix, log) -> BlockMatrix:
    """Fold apply_move over a move sequence."""
    out = m
    for pos, move in enumerate(log):
        try:
            out = apply_move(out, move)
        except MoveError as exc:
            raise MoveError(f"move {pos} failed: {exc}") from exc
    return out


def inverse_move(move: Move) -> Move:
    if move.kind.endswith("add"):
        return Move(move.kind, move.src, move.dst, move.i, move.j, -move.k)
    if move.kind.endswith("scale"):
        return move
    if move.neg == "i":
        return Move(move.kind, move.src, move.dst, move.i, move.j, neg="j")
    if move.neg == "j":
        return Move(move.kind, move.src, move.dst, move.i, move.j, neg="i")
    return move


def inverse_log(log) -> list[Move]:
    return [inverse_move(mv) for mv in reversed(log)]


def move_instances(schema: Schema, profile: StripProfile) -> list[Move]:
    """Every concrete (k-independent) move instance valid on a profile.

    Adds are returned with k=1; swaps with each allowed neg variant.
    """
    out: list[Move] = []
    for rule in schema.rules:
        row_side = rule.kind.startswith("row")
        dim_of = profile.row_dim if row_side else profile.col_dim
        sd, dd = dim_of(rule.src), dim_of(rule.dst)
        if rule.kind.endswith("add"):
            if rule.src == rule.dst:
                for i in range(sd):
                    for j in range(dd):
                        if i != j:
                            out.append(Move(rule.kind, rule.src, rule.dst, i, j, k=1))
            else:
                for i in range(sd):
                    for j in range(dd):
                        out.append(Move(rule.kind, rule.src, rule.dst, i, j, k=1))
        elif rule.kind.endswith("scale"):
            for i in range(sd):
                out.append(Move(rule.kind, rule.src, rule.dst, i))
        else:
            negs = ("i", "j") if rule.signed_swap else ("",)
            for i in range(sd):
                for j in range(i + 1, sd):
                    for neg in negs:
                        out.append(Move(rule.kind, rule.src, rule.dst, i, j, neg=neg))
    return out


def random_scramble(m: BlockMatrix, seed: int, count: int) -> tuple[BlockMatrix, list[Move]]:
    """Apply ``count`` uniformly sampled admissible moves, deterministically
    per seed; returns the scrambled matrix and the log that produced it."""
    schema = _schema_for(m)
    instances = move_instances(schema, m.profile)
    rng = random.Random(seed)
    log: list[Move] = []
    out = m
    if not instances:
        return out, log
    for _ in range(count):
        mv = rng.choice(instances)
        if mv.kind.endswith("add"):
            k = rng.choice([x for x in range(-12, 13) if x != 0])
            mv = Move(mv.kind, mv.src, mv.dst, mv.i, mv.j, k=k, neg=mv.neg)
        out = apply_move(out, mv)
        log.append(mv)
    return out, log


# Certificate serialization: one move per line.

def serialize_move(move: Move) -> str:
    op = move.kind.replace("_", "").upper()
    if move.kind.endswith("add"):
        return f"{op} src={move.src.token}[{move.i}] dst={move.dst.token}[{move.j}] k={move.k}"
    if move.kind.endswith("scale"):
        return f"{op} strip={move.src.token} i={move.i}"
    base = f"{op} strip={move.src.token} i={move.i} j={move.j}"
    if move.neg:
        base += f" neg={move.neg}"
    return base


def serialize_log(log) -> str:
    return "\n".join(serialize_move(mv) for mv in log) + ("\n" if log else "")


_OPS = {"ROWADD": "row_add", "COLADD": "col_add", "ROWSCALE": "row_scale",
        "COLSCALE": "col_scale", "ROWSWAP": "row_swap", "COLSWAP": "col_swap"}


def parse_move(line: str) -> Move:
    parts = line.split()
    if not parts or parts[0] not in _OPS:
        raise MoveError(f"bad move line: {line!r}")
    kind = _OPS[parts[0]]
    fields = dict(p.split("=", 1) for p in parts[1:])
    try:
        if kind.endswith("add"):
            src_tok, i = fields["src"][:-1].split("[")
            dst_tok, j = fields["dst"][:-1].split("[")
            return Move(kind, StripId.parse(src_tok), StripId.parse(dst_tok),
                        int(i), int(j), k=int(fields["k"]))
        strip = StripId.parse(fields["strip"])
        if kind.endswith("scale"):
            return Move(kind, strip, strip, int(fields["i"]))
        return Move(kind, strip, strip, int(fields["i"]), int(fields["j"]),
                    neg=fields.get("neg", ""))
    except (KeyError, ValueError) as exc:
        raise MoveError(f"bad move line: {line!r}") from exc


def parse_log(text: str) -> list[Move]:
    return [parse_move(line) for line in text.splitlines() if line.strip()]
