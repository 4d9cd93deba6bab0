"""Random program sampling and rollout dataset construction.

Programs are drawn from a probabilistic grammar sampler: every statement
slot picks one of six productions (the STMT_STMT production splits the slot
in two, which is what governs program length), bounded by a construct-depth
limit, a statement-split limit, and a token-length cap enforced by
rejection. Each kept program is paired with rollouts from random worlds,
re-sampled until the rollouts jointly exercise every conditional branch and
both outcomes of every loop; programs whose branches cannot be covered are
rejected outright.
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dsl
from .dsl import Action, Cond, If, IfElse, Program, Repeat, Stmt, While
from .grid import GridState, random_world
from .interpreter import Rollout, annotate, execute
from .syntax import MAX_CONSTRUCT_DEPTH


@dataclass(frozen=True)
class GenConfig:
    # Statement-slot production probabilities; must sum to 1.
    p_while: float = 0.15
    p_repeat: float = 0.03
    p_stmt_stmt: float = 0.5
    p_action: float = 0.2
    p_if: float = 0.08
    p_ifelse: float = 0.04
    max_construct_depth: int = MAX_CONSTRUCT_DEPTH
    max_stmt_depth: int = 6  # nested STMT_STMT splits
    max_program_tokens: int = 44
    rollouts_per_program: int = 10
    exec_cap: int = 100
    # Random-world sampler for rollout initial states.
    world_height: int = 8
    world_width: int = 8
    wall_density: float = 0.1
    marker_density: float = 0.2
    coverage_attempts: int = 50
    # Desk-scale split sizes.
    train_size: int = 5000
    val_size: int = 750
    test_size: int = 750

    def validate(self) -> None:
        total = (self.p_while + self.p_repeat + self.p_stmt_stmt
                 + self.p_action + self.p_if + self.p_ifelse)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"production probabilities sum to {total}, not 1")


PAPER_SPLITS = dict(train_size=35_000, val_size=7_500, test_size=7_500)


def paper_scale_config() -> GenConfig:
    return GenConfig(**PAPER_SPLITS)


# --- program sampling ---------------------------------------------------------

_PRODUCTIONS = ("while", "repeat", "stmt_stmt", "action", "if", "ifelse")

# Fixed token cost of each construct excluding its body: e.g. a while is
# WHILE c( <p> c) w( <body> w), 6 tokens around a plain condition. The
# minimum full cost adds one action per mandatory body.
_FRAME_TOKENS = {"while": 6, "repeat": 4, "if": 6, "ifelse": 9}
_NEGATION_TOKENS = 3  # not c( ... c) around the perception


class _TooLong(Exception):
    pass


class _SlotSampler:
    """One program draw; raises _TooLong when the token cap is exceeded.

    Aborting an oversized draw mid-build and starting over is equivalent to
    building the whole tree and rejecting it: either way each attempt is an
    independent draw and the accepted distribution is conditioned on fitting
    the cap.
    """

    def __init__(self, cfg: GenConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.left = cfg.max_program_tokens - 4  # DEF run m( ... m)
        self.probs = (cfg.p_while, cfg.p_repeat, cfg.p_stmt_stmt,
                      cfg.p_action, cfg.p_if, cfg.p_ifelse)

    def spend(self, n: int) -> None:
        self.left -= n
        if self.left < 0:
            raise _TooLong

    def draw_production(self, cdepth: int, sdepth: int) -> str:
        weights = []
        for kind, p in zip(_PRODUCTIONS, self.probs):
            if kind == "stmt_stmt" and sdepth >= self.cfg.max_stmt_depth:
                p = 0.0
            elif kind in _FRAME_TOKENS and cdepth >= self.cfg.max_construct_depth:
                p = 0.0
            weights.append(p)
        u = self.rng.random() * sum(weights)
        acc = 0.0
        for kind, p in zip(_PRODUCTIONS, weights):
            acc += p
            if u < acc:
                return kind
        return "action"

    def cond(self) -> Cond:
        negated = bool(self.rng.integers(2))
        if negated:
            self.spend(_NEGATION_TOKENS)
        return Cond(int(self.rng.integers(len(dsl.PERCEPTIONS))), negated)

    def slot(self, cdepth: int, sdepth: int) -> list[Stmt]:
        kind = self.draw_production(cdepth, sdepth)
        if kind == "stmt_stmt":
            return self.slot(cdepth, sdepth + 1) + self.slot(cdepth, sdepth + 1)
        if kind == "action":
            self.spend(1)
            return [Action(int(self.rng.integers(len(dsl.ACTIONS))))]
        self.spend(_FRAME_TOKENS[kind])
        if kind == "while":
            return [While(self.cond(), tuple(self.slot(cdepth + 1, 0)))]
        if kind == "repeat":
            count = int(self.rng.integers(dsl.REPEAT_MAX + 1))
            return [Repeat(count, tuple(self.slot(cdepth + 1, 0)))]
        if kind == "if":
            return [If(self.cond(), tuple(self.slot(cdepth + 1, 0)))]
        cond = self.cond()
        then_body = tuple(self.slot(cdepth + 1, 0))
        return [IfElse(cond, then_body, tuple(self.slot(cdepth + 1, 0)))]


def sample_program(cfg: GenConfig, rng: np.random.Generator,
                   max_attempts: int = 1000) -> Program:
    """Draw one program within the depth and token-length limits."""
    for _ in range(max_attempts):
        try:
            return Program(tuple(_SlotSampler(cfg, rng).slot(0, 0)))
        except _TooLong:
            continue
    raise RuntimeError(f"no program within {cfg.max_program_tokens} tokens "
                       f"after {max_attempts} attempts")


# --- rollout collection --------------------------------------------------------


def coverage_obligations(program: Program) -> frozenset[tuple[int, bool]]:
    """Branch outcomes the rollouts must jointly exercise."""
    roots, _ = annotate(program)
    wanted: set[tuple[int, bool]] = set()

    def walk(nodes) -> None:
        for node in nodes:
            if isinstance(node.stmt, (While, If, IfElse)):
                wanted.add((node.nid, True))
                wanted.add((node.nid, False))
            walk(node.children)
            walk(node.else_children)

    walk(roots)
    return frozenset(wanted)


def collect_rollouts(program: Program, cfg: GenConfig,
                     rng: np.random.Generator) -> list[Rollout] | None:
    """Rollouts covering all branches, or None to reject the program."""
    wanted = coverage_obligations(program)
    pool: list[Rollout] = []

    def draw() -> Rollout:
        state = random_world(rng, cfg.world_height, cfg.world_width,
                             cfg.wall_density, cfg.marker_density)
        return execute(program, state, cfg.exec_cap)

    for _ in range(cfg.rollouts_per_program):
        pool.append(draw())
    covered = set().union(*(r.branch_events for r in pool)) if pool else set()
    attempts = 0
    while not wanted <= covered and attempts < cfg.coverage_attempts:
        attempts += 1
        rollout = draw()
        pool.append(rollout)
        covered |= rollout.branch_events
    if not wanted <= covered:
        return None
    # Keep a covering subset first, then fill back up in draw order.
    chosen: list[Rollout] = []
    still_needed = set(wanted)
    for rollout in pool:
        if still_needed & rollout.branch_events:
            chosen.append(rollout)
            still_needed -= rollout.branch_events
    for rollout in pool:
        if len(chosen) >= cfg.rollouts_per_program:
            break
        if rollout not in chosen:
            chosen.append(rollout)
    return chosen[:cfg.rollouts_per_program]


# --- dataset records and storage ------------------------------------------------


@dataclass
class DatasetRecord:
    program_text: str
    rollouts: list[Rollout]

    @property
    def record_id(self) -> str:
        return hashlib.sha256(self.program_text.encode()).hexdigest()[:16]


def _make_record(cfg: GenConfig, seed: int, index: int) -> DatasetRecord | None:
    """Candidate record for draw `index`; None when rejected."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    try:
        program = sample_program(cfg, rng)
    except RuntimeError:
        return None
    rollouts = collect_rollouts(program, cfg, rng)
    if rollouts is None:
        return None
    return DatasetRecord(dsl.to_text(program), rollouts)


def generate_records(cfg: GenConfig, seed: int, count: int,
                     n_jobs: int = 1, batch: int = 256) -> list[DatasetRecord]:
    """First `count` unique accepted records in draw order.

    Draw indices are processed in order with per-index RNG streams, so the
    result is identical for any worker count.
    """
    cfg.validate()
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    index = 0
    executor = ProcessPoolExecutor(n_jobs) if n_jobs > 1 else None
    try:
        while len(records) < count:
            indices = range(index, index + batch)
            if executor is None:
                results = [_make_record(cfg, seed, i) for i in indices]
            else:
                results = list(executor.map(_make_record,
                                            [cfg] * batch, [seed] * batch, indices))
            for rec in results:
                if rec is None or rec.program_text in seen:
                    continue
                seen.add(rec.program_text)
                records.append(rec)
                if len(records) >= count:
                    break
            index += batch
    finally:
        if executor is not None:
            executor.shutdown()
    return records


# Binary rollout file: little-endian, versioned, length-prefixed records.
_MAGIC = b"KSRL"
_VERSION = 1


def _pack_rollout(rollout: Rollout) -> bytes:
    s = rollout.initial_state
    h, w = s.height, s.width
    out = [struct.pack("<HHHHB", h, w, s.agent_row, s.agent_col, s.agent_dir)]
    out.append(np.packbits(s.walls).tobytes())
    out.append(s.markers.astype("<u1").tobytes())
    out.append(struct.pack("<H", len(rollout.actions)))
    out.append(bytes(rollout.actions))
    out.append(bytes(np.packbits(np.array(rollout.perceptions, dtype=bool).reshape(-1))
                     .tobytes()) if rollout.actions else b"")
    out.append(struct.pack("<B", 1 if rollout.terminated == "program-end" else 0))
    return b"".join(out)


@dataclass
class StoredRollout:
    """Rollout fields persisted for training: init state, actions, perceptions."""
    initial_state: GridState
    actions: list[int]
    perceptions: list[tuple[bool, bool, bool, bool, bool]]
    terminated: str


def _unpack_rollout(buf: bytes, offset: int) -> tuple[StoredRollout, int]:
    h, w, r, c, d = struct.unpack_from("<HHHHB", buf, offset)
    offset += 9
    nbits = h * w
    nbytes = (nbits + 7) // 8
    walls = np.unpackbits(np.frombuffer(buf, np.uint8, nbytes, offset))[:nbits]
    walls = walls.reshape(h, w).astype(bool)
    offset += nbytes
    markers = np.frombuffer(buf, "<u1", h * w, offset).reshape(h, w).copy()
    offset += h * w
    (n_actions,) = struct.unpack_from("<H", buf, offset)
    offset += 2
    actions = list(buf[offset:offset + n_actions])
    offset += n_actions
    pbytes = (n_actions * 5 + 7) // 8
    bits = np.unpackbits(np.frombuffer(buf, np.uint8, pbytes, offset))[:n_actions * 5]
    perceptions = [tuple(bool(b) for b in bits[i * 5:(i + 1) * 5]) for i in range(n_actions)]
    offset += pbytes
    terminated = "program-end" if buf[offset] else "step-cap"
    offset += 1
    state = GridState(walls, markers, r, c, d)
    return StoredRollout(state, actions, perceptions, terminated), offset


def write_rollout_file(path: Path, records: list[DatasetRecord]) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC + struct.pack("<HI", _VERSION, len(records)))
        for rec in records:
            payload = struct.pack("<B", len(rec.rollouts)) + b"".join(
                _pack_rollout(r) for r in rec.rollouts)
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)


def read_rollout_file(path: Path) -> list[list[StoredRollout]]:
    buf = Path(path).read_bytes()
    if buf[:4] != _MAGIC:
        raise ValueError(f"{path}: not a rollout file")
    version, n_records = struct.unpack_from("<HI", buf, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported rollout file version {version}")
    offset = 10
    out = []
    for _ in range(n_records):
        (payload_len,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        end = offset + payload_len
        n_rollouts = buf[offset]
        offset += 1
        rollouts = []
        for _ in range(n_rollouts):
            rollout, offset = _unpack_rollout(buf, offset)
            rollouts.append(rollout)
        if offset != end:
            raise ValueError(f"{path}: corrupt record framing")
        out.append(rollouts)
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_dataset(cfg: GenConfig, seed: int, outdir: str | Path,
                  n_jobs: int = 1) -> dict:
    """Build train/val/test stores under `outdir`; returns the manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    total = cfg.train_size + cfg.val_size + cfg.test_size
    records = generate_records(cfg, seed, total, n_jobs=n_jobs)
    splits = {
        "train": records[:cfg.train_size],
        "val": records[cfg.train_size:cfg.train_size + cfg.val_size],
        "test": records[cfg.train_size + cfg.val_size:],
    }
    manifest: dict = {"config": asdict(cfg), "seed": seed, "counts": {}, "hashes": {}}
    for name, recs in splits.items():
        program_path = outdir / f"{name}.txt"
        program_path.write_text("".join(r.program_text + "\n" for r in recs))
        rollout_path = outdir / f"{name}.rollouts"
        write_rollout_file(rollout_path, recs)
        manifest["counts"][name] = len(recs)
        manifest["hashes"][f"{name}.txt"] = _sha256(program_path)
        manifest["hashes"][f"{name}.rollouts"] = _sha256(rollout_path)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


@dataclass
class Split:
    programs: list[Program]
    token_ids: list[list[int]]
    rollouts: list[list[StoredRollout]]

    def __len__(self) -> int:
        return len(self.programs)


def load_split(outdir: str | Path, name: str) -> Split:
    outdir = Path(outdir)
    texts = (outdir / f"{name}.txt").read_text().splitlines()
    programs = [dsl.parse(t) for t in texts]
    token_ids = [dsl.token_ids(t.split()) for t in texts]
    rollouts = read_rollout_file(outdir / f"{name}.rollouts")
    if len(rollouts) != len(programs):
        raise ValueError(f"{name}: program/rollout count mismatch")
    return Split(programs, token_ids, rollouts)
