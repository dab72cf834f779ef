"""Key-instruction weighting of jump edges and the successor policy built on it."""

from __future__ import annotations

from dataclasses import dataclass

from revex.evm import BasicBlock, Cfg
from revex.evm.opcodes import KEY_INSTRUCTIONS

DEAD_END = frozenset({"REVERT", "INVALID"})


def count_weight(block: BasicBlock) -> tuple[int, int]:
    """(number of key instructions in ``block``, its first pc)."""
    return sum(1 for ins in block.instructions if ins.op in KEY_INSTRUCTIONS), block.first_pc


def is_dead_end(block: BasicBlock) -> bool:
    return any(ins.op in DEAD_END for ins in block.instructions)


@dataclass(frozen=True)
class SmcCfg:
    base: Cfg
    edge_weight: dict[tuple[int, int], int]
    pruned_edges: frozenset[tuple[int, int]]

    def weight(self, bid: int, succ: int) -> int:
        return self.edge_weight[(bid, succ)]


def build_smc_cfg(cfg: Cfg) -> SmcCfg:
    weights: dict[tuple[int, int], int] = {}
    pruned: set[tuple[int, int]] = set()
    for block in cfg.blocks.values():
        for s in block.successors:
            w, first_pc = count_weight(cfg.blocks[s])
            weights[(block.id, first_pc)] = w
            # a dead-end block that still touches state keeps its edge
            if w == 0 and is_dead_end(cfg.blocks[s]):
                pruned.add((block.id, s))
        succ = set(block.successors)
        if len(succ) > 1 and any(weights[(block.id, s)] > 0 for s in succ):
            pruned.update((block.id, s) for s in succ if weights[(block.id, s)] == 0)
    return SmcCfg(cfg, weights, frozenset(pruned))


def next_successors(smc: SmcCfg, bid: int, prune: bool = True) -> list[int]:
    """Successors of ``bid`` in exploration order, heaviest first.

    With ``prune=False`` the order is kept but nothing is dropped.
    """
    succ = sorted(set(smc.base.blocks[bid].successors), key=lambda s: (-smc.edge_weight[(bid, s)], s))
    if not prune:
        return succ
    return [s for s in succ if (bid, s) not in smc.pruned_edges]


def to_dot(smc: SmcCfg, name: str = "smc") -> str:
    lines = [f'digraph "{name}" {{', "  node [shape=box, style=rounded];"]
    pruned_targets = {s for _, s in smc.pruned_edges}
    live_targets = {s for (b, s) in smc.base.edges() if (b, s) not in smc.pruned_edges}
    for b in sorted(smc.base.blocks):
        block = smc.base.blocks[b]
        label = f"{b:#x}\\n" + "\\n".join(i.op for i in block.instructions[:6])
        if len(block.instructions) > 6:
            label += "\\n..."
        gray = b in pruned_targets and b not in live_targets
        style = ', style="filled", fillcolor=gray80' if gray else ""
        lines.append(f'  b{b} [label="{label}"{style}];')
    for b, s in sorted(set(smc.base.edges())):
        w = smc.edge_weight[(b, s)]
        if (b, s) in smc.pruned_edges:
            lines.append(f'  b{b} -> b{s} [label="{w}", style=dashed, color=blue];')
        else:
            lines.append(f'  b{b} -> b{s} [label="{w}", color=red];')
    lines.append("}")
    return "\n".join(lines) + "\n"
