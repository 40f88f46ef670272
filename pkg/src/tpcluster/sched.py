"""Latency-aware list scheduling of straight-line instruction blocks.

The scheduler reorders instructions between barriers so that FP results
have time to leave the pipeline before they are consumed.  Latencies follow
the timing model: integer and memory operations take one cycle, FP
operations ``stages + 1`` and div/sqrt a format-dependent count.  Among the
instructions whose operands are ready, the one with the longest remaining
latency-weighted path to the end of the block wins; ties go to the original
position.  Barriers and End are fences: nothing moves across them.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Sequence

from .isa import Instr, Kind, Program, end
from .timing import DIVSQRT_LATENCY, ClusterConfig, simulate

_FENCES = (Kind.BARRIER, Kind.END)
WINDOW = 16      # candidate horizon, in instructions


def latency(ins: Instr, stages: int) -> int:
    if ins.kind is Kind.FP:
        return stages + 1
    if ins.kind is Kind.DIVSQRT:
        return DIVSQRT_LATENCY[ins.fmt.name]
    return 1


@dataclass
class DepGraph:
    """Dependencies of one fence-free block; node i is ``block[i]``.

    ``succs[i]`` holds ``(j, lat)`` pairs meaning j may issue no earlier than
    ``lat`` cycles after i.  Register true dependencies carry the producer
    latency; register anti/output dependencies and same-address memory
    ordering carry 1 (plain program order).
    """
    latency: list[int]
    succs: list[list[tuple[int, int]]] = field(default_factory=list)
    n_preds: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.latency)

    def edges(self):
        for i, out in enumerate(self.succs):
            for j, lat in out:
                yield i, j, lat


def dep_graph(block: Sequence[Instr], stages: int) -> DepGraph:
    if stages not in (0, 1, 2):
        raise ValueError(f"pipeline stages must be 0, 1 or 2, got {stages}")
    n = len(block)
    g = DepGraph([latency(ins, stages) for ins in block], [[] for _ in range(n)], [0] * n)
    edges: dict[tuple[int, int], int] = {}

    def add(i, j, lat):
        if i != j and edges.get((i, j), 0) < lat:
            edges[(i, j)] = lat

    writer: dict[int, int] = {}
    readers: dict[int, list[int]] = {}
    last_store: dict[tuple, int] = {}
    loads: dict[tuple, list[int]] = {}
    for j, ins in enumerate(block):
        if ins.kind in _FENCES:
            raise ValueError(f"instruction {j} is a {ins.kind.value}; split blocks at fences")
        for s in ins.srcs:
            if s in writer:
                add(writer[s], j, g.latency[writer[s]])
            readers.setdefault(s, []).append(j)
        if ins.is_mem:
            key = (ins.region, ins.addr)
            if ins.kind is Kind.LOAD:
                if key in last_store:
                    add(last_store[key], j, 1)
                loads.setdefault(key, []).append(j)
            else:
                if key in last_store:
                    add(last_store[key], j, 1)
                for r in loads.pop(key, ()):
                    add(r, j, 1)
                last_store[key] = j
        if ins.dst is not None:
            d = ins.dst
            if d in writer:
                add(writer[d], j, 1)
            for r in readers.pop(d, ()):
                add(r, j, 1)
            writer[d] = j
    for (i, j), lat in edges.items():
        g.succs[i].append((j, lat))
        g.n_preds[j] += 1
    return g


def critical_path(g: DepGraph) -> list[int]:
    """Longest latency-weighted path from each node to the end of the block."""
    prio = list(g.latency)
    for i in range(len(g) - 1, -1, -1):
        for j, lat in g.succs[i]:
            if lat + prio[j] > prio[i]:
                prio[i] = lat + prio[j]
    return prio


def _order(g: DepGraph, window: int) -> list[int]:
    prio = critical_path(g)
    n = len(g)
    left = list(g.n_preds)
    earliest = [0] * n
    done = [False] * n
    lo = 0                                   # oldest unscheduled instruction
    parked: list[int] = []                   # ready but beyond the window
    waiting: list[tuple[int, int]] = []      # (earliest cycle, idx)
    avail: list[tuple[int, int]] = []        # (-priority, idx)

    def release(i):
        if i < lo + window:
            heapq.heappush(waiting, (earliest[i], i))
        else:
            heapq.heappush(parked, i)

    for i in range(n):
        if left[i] == 0:
            release(i)
    out = []
    t = 0
    while len(out) < n:
        while parked and parked[0] < lo + window:
            i = heapq.heappop(parked)
            heapq.heappush(waiting, (earliest[i], i))
        while waiting and waiting[0][0] <= t:
            _, i = heapq.heappop(waiting)
            heapq.heappush(avail, (-prio[i], i))
        if not avail:
            t = waiting[0][0]
            continue
        _, i = heapq.heappop(avail)
        out.append(i)
        done[i] = True
        while lo < n and done[lo]:
            lo += 1
        for j, lat in g.succs[i]:
            earliest[j] = max(earliest[j], t + lat)
            left[j] -= 1
            if left[j] == 0:
                release(j)
        t += 1
    return out


def _blocks(instrs: Sequence[Instr]):
    """Yield (block, fence) pairs; fence is None after a trailing block."""
    cur: list[Instr] = []
    for ins in instrs:
        if ins.kind in _FENCES:
            yield cur, ins
            cur = []
        else:
            cur.append(ins)
    if cur:
        yield cur, None


def list_schedule(block: Sequence[Instr], stages: int, window: int = WINDOW) -> list[Instr]:
    """Reorder ``block`` for an FPU with ``stages`` pipeline registers.

    Only instructions less than ``window`` positions past the oldest
    unscheduled one are candidates, so code moves locally, the way a
    compiler reorders an unrolled loop body.  Barriers and End may appear;
    they stay in place and split the stream into independently scheduled
    pieces.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    out: list[Instr] = []
    for piece, fence in _blocks(block):
        g = dep_graph(piece, stages)
        out.extend(piece[i] for i in _order(g, window))
        if fence is not None:
            out.append(fence)
    return out


def block_cycles(block: Sequence[Instr], stages: int) -> int:
    """Single-core cycles for one fence-free block, registers from earlier blocks ready."""
    cfg = ClusterConfig(1, 1, stages)
    prog = Program(0, tuple(block) + (end(),))
    return simulate(cfg, [prog], check=False).elapsed_cycles


def schedule_block(block: Sequence[Instr], stages: int) -> list[Instr]:
    """list_schedule with a guard: keep the original order unless it is slower."""
    block = list(block)
    new = list_schedule(block, stages)
    if new == block or block_cycles(new, stages) >= block_cycles(block, stages):
        return block
    return new


def schedule_program(p: Program, stages: int) -> Program:
    """Schedule every barrier-delimited block of ``p`` with the non-harm guard."""
    out: list[Instr] = []
    for piece, fence in _blocks(p.instrs):
        out.extend(schedule_block(piece, stages))
        if fence is not None:
            out.append(fence)
    return Program(p.core_id, tuple(out), p.flops)


def schedule_programs(programs: Sequence[Program], cfg: ClusterConfig) -> list[Program]:
    """Schedule a whole cluster build, falling back to the original streams if slower."""
    new = [schedule_program(p, cfg.pipeline_stages) for p in programs]
    if simulate(cfg, new).elapsed_cycles > simulate(cfg, programs).elapsed_cycles:
        return list(programs)
    return new
