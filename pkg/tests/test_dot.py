import re

import numpy as np

from fuzz import berry, grow
from ll0.dot import export_dot

NODE = re.compile(r'^  n(\d+) \[shape=(\w+), style=filled, fillcolor=\w+, label="[^"]*"\];$')
EDGE = re.compile(r'^  n(\d+) -> n(\d+) \[label="[^"]*"(, style=dashed)?\];$')


def parse(text):
    """Strict line grammar for the emitted subset of DOT."""
    lines = text.splitlines()
    assert re.match(r"^digraph \w+ \{$", lines[0]) and lines[-1] == "}"
    nodes, edges = {}, []
    for line in lines[1:-1]:
        if line == "  rankdir=BT;":
            continue
        m = NODE.match(line)
        if m:
            nodes[int(m.group(1))] = m.group(2)
            continue
        m = EDGE.match(line)
        assert m, line
        edges.append((int(m.group(1)), int(m.group(2)), bool(m.group(3))))
    return nodes, edges


def test_berry_without_outputs():
    nodes, edges = parse(export_dot(berry(), omit_outputs=True))
    shapes = sorted(nodes.values())
    assert shapes == ["box"] * 3 + ["circle"] + ["diamond"] * 3
    assert len(edges) == 6


def test_berry_full():
    net = berry()
    nodes, edges = parse(export_dot(net))
    assert len(nodes) == 9 and len(edges) == len(net.edges)
    frozen = {(s, d) for s, d, dashed in edges if dashed}
    assert frozen == {k for k, e in net.edges.items() if e.frozen}


def test_empty():
    assert parse(export_dot(None)) == ({}, [])


def test_any_snapshot_parses():
    for seed in range(10):
        net = grow(np.random.default_rng(seed), max_nodes=80)
        nodes, edges = parse(export_dot(net))
        assert set(nodes) == set(net.nodes)
        assert all(nodes[s] and nodes[d] for s, d, _ in edges)
