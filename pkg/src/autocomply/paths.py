"""All-paths obligations over a single method's CFG.

Two obligations are supported:

* :class:`ReturnNonNull` - no path returns a null literal or a register whose
  last assignment was a null constant (``move-object`` copies propagate it).
* :class:`MustCall` - every path from entry to a return invokes one of the
  targets. Calls to app methods count when the callee itself satisfies the
  obligation, expanded up to ``inline_depth`` levels.

Paths are walks of the CFG; a violating walk exists iff one exists that
visits every node at most twice, so each loop is taken at most once.
When an obligation fails, the witness is the shortest violating path from
the entry, ties broken by the lexicographically smallest offset sequence.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .dex.model import CONST_NULL, INVOKE, RETURN, THROW, CodeItem, DecodedInsn, MethodRef
from .errors import BudgetExceeded

DEFAULT_INLINE_DEPTH = 3
DEFAULT_PATH_BUDGET = 10_000
DEFAULT_STEP_BUDGET = 1_000_000


@dataclass(frozen=True, eq=False)
class MethodCfg:
    """Instruction-level CFG of one method. Nodes are code-unit offsets."""

    method: MethodRef
    entry: Optional[int]
    insns: Mapping[int, DecodedInsn]
    succ: Mapping[int, tuple[int, ...]]

    def nodes(self) -> list[int]:
        return sorted(self.insns)

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in sorted(self.succ) for b in self.succ[a]]

    def returns(self) -> list[int]:
        return [o for o in self.nodes() if self.insns[o].kind == RETURN]


def build_method_cfg(method: MethodRef, code: CodeItem) -> MethodCfg:
    ordered = sorted(code.instructions, key=lambda i: i.offset)
    insns = {i.offset: i for i in ordered}
    succ: dict[int, tuple[int, ...]] = {}
    for k, insn in enumerate(ordered):
        out = set(t for t in insn.targets if t in insns)
        if insn.falls_through and k + 1 < len(ordered):
            out.add(ordered[k + 1].offset)
        if insn.kind in (INVOKE, THROW):
            for tb in code.try_handlers:
                if tb.start <= insn.offset < tb.end:
                    out.update(h for h in tb.handlers if h in insns)
        succ[insn.offset] = tuple(sorted(out))
    entry = ordered[0].offset if ordered else None
    return MethodCfg(method, entry, insns, succ)


@dataclass(frozen=True)
class ReturnNonNull:
    pass


@dataclass(frozen=True)
class MustCall:
    targets: frozenset[str]

    def __init__(self, targets):
        object.__setattr__(self, "targets", frozenset(targets))


@dataclass(frozen=True)
class PathResult:
    satisfied: bool
    witness: Optional[tuple[int, ...]] = None


@dataclass
class Budget:
    """Search budget shared by one top-level query and its inlined callees."""

    max_states: int = DEFAULT_PATH_BUDGET
    max_steps: int = DEFAULT_STEP_BUDGET
    states: int = 0
    steps: int = 0

    def state(self) -> None:
        self.states += 1
        if self.states > self.max_states:
            raise BudgetExceeded(f"explored more than {self.max_states} path states")

    def step(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.max_steps:
            raise BudgetExceeded(f"exceeded {self.max_steps} analysis steps")


def target_matches(ref: Optional[MethodRef], targets: frozenset[str]) -> bool:
    """A target is a bare method name or a suffix of ``owner.name(descriptor)``."""
    if ref is None:
        return False
    full = f"{ref.owner}.{ref.name}{ref.descriptor}"
    return any(ref.name == t or full.endswith(t) for t in targets)


def null_transfer(insn: DecodedInsn, nulls: frozenset[int]) -> frozenset[int]:
    if insn.kind == CONST_NULL:
        return (nulls - set(insn.writes)) | {insn.register}
    if insn.copy_from is not None:
        if insn.copy_from in nulls:
            return nulls | set(insn.writes)
        return nulls - set(insn.writes)
    if insn.writes:
        return nulls - set(insn.writes)
    return nulls


def _rebuild(parent: dict, state) -> tuple[int, ...]:
    path = []
    while state is not None:
        path.append(state[0] if isinstance(state, tuple) else state)
        state = parent[state]
    return tuple(reversed(path))


def _return_nonnull(cfg: MethodCfg, budget: Budget) -> PathResult:
    start = (cfg.entry, frozenset())
    parent = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        budget.state()
        node, nulls = state
        insn = cfg.insns[node]
        if insn.kind == RETURN and (insn.null_literal or insn.register in nulls):
            return PathResult(False, _rebuild(parent, state))
        after = null_transfer(insn, nulls)
        succs = cfg.succ[node]
        budget.step(len(succs) + 1)
        for s in succs:
            nxt = (s, after)
            if nxt not in parent:
                parent[nxt] = state
                queue.append(nxt)
    return PathResult(True)


@dataclass
class _CallContext:
    targets: frozenset[str]
    callee: Callable[[MethodRef], Optional[MethodCfg]]
    budget: Budget
    memo: dict = field(default_factory=dict)


def _must_call(cfg: MethodCfg, depth: int, ctx: _CallContext) -> PathResult:
    # depth drops on every nested call, so recursion always bottoms out
    key = (cfg.method, depth)
    if key in ctx.memo:
        return ctx.memo[key]

    discharged = set()
    for off, insn in cfg.insns.items():
        ctx.budget.step()
        if insn.kind != INVOKE:
            continue
        if target_matches(insn.target, ctx.targets):
            discharged.add(off)
        elif depth > 0:
            sub = ctx.callee(insn.target)
            if sub is not None and sub.entry is not None and _must_call(sub, depth - 1, ctx).satisfied:
                discharged.add(off)

    result = PathResult(True)
    if cfg.entry not in discharged:
        parent = {cfg.entry: None}
        queue = deque([cfg.entry])
        while queue:
            node = queue.popleft()
            ctx.budget.state()
            if cfg.insns[node].kind == RETURN:
                result = PathResult(False, _rebuild(parent, node))
                break
            for s in cfg.succ[node]:
                ctx.budget.step()
                if s not in parent and s not in discharged:
                    parent[s] = node
                    queue.append(s)
    ctx.memo[key] = result
    return result


def all_paths_satisfy(cfg: MethodCfg, obligation, inline_depth: int = DEFAULT_INLINE_DEPTH, *,
                      callee: Optional[Callable[[MethodRef], Optional[MethodCfg]]] = None,
                      budget: Optional[Budget] = None) -> PathResult:
    """Check ``obligation`` on every entry-to-return path of ``cfg``.

    ``callee`` resolves an invoke target to the CFG of an app method (or None
    for framework and unresolved targets). Raises :class:`BudgetExceeded`
    when the search budget runs out; callers must treat that as inconclusive.
    """
    if inline_depth < 0:
        raise ValueError("inline_depth must be >= 0")
    if budget is None:
        budget = Budget()
    if cfg.entry is None:
        return PathResult(True)
    if isinstance(obligation, ReturnNonNull):
        return _return_nonnull(cfg, budget)
    if isinstance(obligation, MustCall):
        ctx = _CallContext(obligation.targets, callee or (lambda ref: None), budget)
        return _must_call(cfg, inline_depth, ctx)
    raise TypeError(f"unknown obligation {obligation!r}")
