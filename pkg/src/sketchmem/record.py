"""Ground-truth computation records: which modules fired, with what
outputs, in what hierarchy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateIdError, UnknownNodeError


@dataclass(frozen=True)
class Node:
    node_id: int
    module_id: int
    output: np.ndarray
    children: tuple[int, ...] = ()


@dataclass(frozen=True)
class ComputationRecord:
    """A DAG of fired modules. Children may be shared between parents
    (each parent embeds the shared child independently); cycles are
    rejected at construction."""

    nodes: dict[int, Node] = field(default_factory=dict)
    roots: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for rid in self.roots:
            if rid not in self.nodes:
                raise UnknownNodeError(rid)
        for node in self.nodes.values():
            for cid in node.children:
                if cid not in self.nodes:
                    raise UnknownNodeError(cid)
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        WHITE, GRAY, BLACK = 0, 1, 2
        color = dict.fromkeys(self.nodes, WHITE)
        for start in self.nodes:
            if color[start] != WHITE:
                continue
            stack = [(start, iter(self.nodes[start].children))]
            color[start] = GRAY
            while stack:
                nid, it = stack[-1]
                advanced = False
                for cid in it:
                    if color[cid] == GRAY:
                        raise ValueError(f"computation record has a cycle through node {cid}")
                    if color[cid] == WHITE:
                        color[cid] = GRAY
                        stack.append((cid, iter(self.nodes[cid].children)))
                        advanced = True
                        break
                if not advanced:
                    color[nid] = BLACK
                    stack.pop()

    @classmethod
    def build(cls, nodes: list[tuple[int, int, np.ndarray, list[int]]], roots: list[int]):
        """Construct from (node_id, module_id, output, children) tuples."""
        table: dict[int, Node] = {}
        for nid, mid, x, children in nodes:
            if nid in table:
                raise DuplicateIdError(f"node id {nid} used twice")
            vec = np.ascontiguousarray(x, dtype=np.float64)
            vec.setflags(write=False)
            table[nid] = Node(nid, mid, vec, tuple(children))
        return cls(table, tuple(roots))

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def root_module_ids(self) -> list[int]:
        return [self.nodes[r].module_id for r in self.roots]

    def depth(self) -> int:
        memo: dict[int, int] = {}

        def go(nid: int) -> int:
            if nid not in memo:
                kids = self.nodes[nid].children
                memo[nid] = 1 + (max(go(c) for c in kids) if kids else 0)
            return memo[nid]

        return max((go(r) for r in self.roots), default=0)

    def __len__(self) -> int:
        return len(self.nodes)

    def to_obj(self) -> dict:
        """JSON-ready dict (corpus line payload, minus event metadata)."""
        return {
            "nodes": [
                {
                    "node_id": n.node_id,
                    "module_id": n.module_id,
                    "x": [float(v) for v in n.output],
                    "children": list(n.children),
                }
                for n in (self.nodes[k] for k in sorted(self.nodes))
            ],
            "roots": list(self.roots),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ComputationRecord":
        return cls.build(
            [
                (n["node_id"], n["module_id"], np.asarray(n["x"], dtype=np.float64), n["children"])
                for n in obj["nodes"]
            ],
            obj["roots"],
        )
