"""Graphviz DOT rendering of an LL0 network."""
from __future__ import annotations

from .graph import Network, NodeKind

_SHAPES = {NodeKind.INPUT: "box", NodeKind.OUTPUT: "box",
           NodeKind.VALUE: "diamond", NodeKind.CONCEPT: "circle"}
_COLORS = {NodeKind.INPUT: "lightblue", NodeKind.OUTPUT: "lightblue",
           NodeKind.VALUE: "yellow", NodeKind.CONCEPT: "lightblue"}


def _label(node):
    if node.kind is NodeKind.VALUE:
        return f"{node.id}\\nmu={node.mu:.3g}"
    if node.kind is NodeKind.INPUT:
        return f"in{node.id}"
    if node.kind is NodeKind.OUTPUT:
        return f"out{node.id}"
    return str(node.id)


def export_dot(net: Network | None, omit_outputs=False, name="ll0") -> str:
    lines = [f"digraph {name} {{", "  rankdir=BT;"]
    if net is not None:
        hidden = set(net.outputs) if omit_outputs else set()
        for n in sorted(net.nodes):
            if n in hidden:
                continue
            node = net.nodes[n]
            lines.append(f'  n{n} [shape={_SHAPES[node.kind]}, style=filled, '
                         f'fillcolor={_COLORS[node.kind]}, label="{_label(node)}"];')
        for (s, d), e in sorted(net.edges.items()):
            if d in hidden or s in hidden:
                continue
            style = ", style=dashed" if e.frozen else ""
            lines.append(f'  n{s} -> n{d} [label="{e.weight:.3g}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
