"""Dynamic LL0 network: typed nodes, weighted edges, forward pass and structure queries.

The network is a mutable DAG.  Node and edge objects are the source of truth;
a flat, topologically ordered :class:`Plan` is compiled lazily from them and
handed to the numeric kernels.  Any mutation that goes through the public
attributes invalidates the cached plan.
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import InvalidDimensionError, InvalidNetworkError, InvalidTargetError

SIGMA_MIN = 1e-3


class NodeKind(enum.IntEnum):
    INPUT = 0
    VALUE = 1
    CONCEPT = 2
    OUTPUT = 3


# plain ints for hot loops; enum attribute access is slow
K_INPUT, K_VALUE, K_CONCEPT, K_OUTPUT = 0, 1, 2, 3

_PLAN_FIELDS = frozenset({"mu", "sigma", "theta", "weight", "frozen"})


class _Tracked:
    """Mixin that drops the owner's compiled plan when a numeric field changes."""

    __slots__ = ()

    def __setattr__(self, name, value):
        object.__setattr__(self, name, value)
        if name in _PLAN_FIELDS:
            net = getattr(self, "_net", None)
            if net is not None:
                net._plan = None


class Node(_Tracked):
    __slots__ = ("id", "kind", "mu", "sigma", "theta", "created_at",
                 "activation_sum", "last_activation", "_net")

    def __init__(self, id, kind, *, mu=0.0, sigma=1.0, theta=0.0, created_at=0):
        self.id = id
        self.kind = NodeKind(kind)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.theta = float(theta)
        self.created_at = created_at
        self.activation_sum = 0.0
        self.last_activation = 0.0
        self._net = None

    def performance(self, t):
        """Running mean activation ``activation_sum / (t - created_at)``."""
        age = t - self.created_at
        if age <= 0:
            return float("nan")
        return self.activation_sum / age

    def __repr__(self):
        k = self.kind.name.lower()
        if self.kind is NodeKind.VALUE:
            return f"Node({self.id}, {k}, mu={self.mu:.4g}, sigma={self.sigma:.4g})"
        if self.kind is NodeKind.CONCEPT:
            return f"Node({self.id}, {k}, theta={self.theta:.4g})"
        return f"Node({self.id}, {k})"


class Edge(_Tracked):
    __slots__ = ("src", "dst", "weight", "frozen", "_net")

    def __init__(self, src, dst, weight=0.0, frozen=False):
        self.src = src
        self.dst = dst
        self.weight = float(weight)
        self.frozen = bool(frozen)
        self._net = None

    @property
    def key(self):
        return (self.src, self.dst)

    def __repr__(self):
        flag = ", frozen" if self.frozen else ""
        return f"Edge({self.src}->{self.dst}, w={self.weight:.4g}{flag})"


@dataclass
class Plan:
    """Topologically ordered, array-backed snapshot of a network.

    ``p1`` holds mu for value nodes and theta for concept nodes; ``p2`` holds
    sigma.  Incoming edges are stored CSR-style per position.
    """

    order: list
    pos: dict
    kind: np.ndarray
    aux: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    in_w: np.ndarray
    in_frozen: np.ndarray
    slot: dict
    out_pos: np.ndarray
    in_pos: np.ndarray
    concept_pos: list

    def kernel_args(self):
        return (self.kind, self.aux, self.p1, self.p2, self.in_ptr,
                self.in_src, self.in_w, self.out_pos)


class Network:
    """The single evolving LL0 model."""

    def __init__(self, n_inputs, n_outputs, sigma_min=SIGMA_MIN):
        if n_inputs < 1:
            raise InvalidDimensionError(f"need at least one input, got {n_inputs}")
        if n_outputs < 2:
            raise InvalidDimensionError(f"need at least two outputs, got {n_outputs}")
        self.n_inputs = int(n_inputs)
        self.n_outputs = int(n_outputs)
        self.sigma_min = sigma_min
        self.step = 0
        self.nodes: dict[int, Node] = {}
        self.edges: dict[tuple[int, int], Edge] = {}
        self._in: dict[int, dict[int, Edge]] = {}
        self._out: dict[int, dict[int, Edge]] = {}
        self._next_id = 0
        self._plan = None
        self.inputs = [self.add_node(NodeKind.INPUT).id for _ in range(n_inputs)]
        self.outputs = [self.add_node(NodeKind.OUTPUT).id for _ in range(n_outputs)]

    # -- mutation ---------------------------------------------------------

    def add_node(self, kind, **params) -> Node:
        node = Node(self._next_id, kind, created_at=self.step, **params)
        if node.kind is NodeKind.VALUE:
            node.sigma = max(node.sigma, self.sigma_min)
        self._next_id += 1
        node._net = self
        self.nodes[node.id] = node
        self._in[node.id] = {}
        self._out[node.id] = {}
        self._plan = None
        return node

    def add_edge(self, src, dst, weight=0.0, frozen=False) -> Edge:
        if src not in self.nodes or dst not in self.nodes:
            raise InvalidTargetError(f"edge {src}->{dst} references a missing node")
        if (src, dst) in self.edges:
            raise InvalidNetworkError(f"parallel edge {src}->{dst}")
        edge = Edge(src, dst, weight, frozen)
        edge._net = self
        self.edges[edge.key] = edge
        self._out[src][dst] = edge
        self._in[dst][src] = edge
        self._plan = None
        return edge

    def remove_edge(self, src, dst):
        edge = self.edges.pop((src, dst))
        del self._out[src][dst]
        del self._in[dst][src]
        edge._net = None
        self._plan = None

    def remove_node(self, node_id):
        for src in list(self._in[node_id]):
            self.remove_edge(src, node_id)
        for dst in list(self._out[node_id]):
            self.remove_edge(node_id, dst)
        node = self.nodes.pop(node_id)
        del self._in[node_id], self._out[node_id]
        node._net = None
        self._plan = None

    # -- queries ----------------------------------------------------------

    def in_edges(self, node_id) -> list[Edge]:
        return list(self._in[node_id].values())

    def out_edges(self, node_id) -> list[Edge]:
        return list(self._out[node_id].values())

    def parents(self, node_id) -> list[int]:
        return list(self._in[node_id])

    def children(self, node_id) -> list[int]:
        return list(self._out[node_id])

    def ids_of(self, kind) -> list[int]:
        return [i for i, n in self.nodes.items() if n.kind is kind]

    @property
    def concepts(self) -> list[int]:
        return self.ids_of(NodeKind.CONCEPT)

    @property
    def values(self) -> list[int]:
        return self.ids_of(NodeKind.VALUE)

    def n_concepts(self):
        return sum(1 for n in self.nodes.values() if n.kind is NodeKind.CONCEPT)

    def param_count(self):
        """Live parameters: theta per concept, (mu, sigma) per value, every edge weight."""
        count = len(self.edges)
        for n in self.nodes.values():
            if n.kind is NodeKind.CONCEPT:
                count += 1
            elif n.kind is NodeKind.VALUE:
                count += 2
        return count

    def topological_order(self) -> list[int]:
        indeg = {i: len(ins) for i, ins in self._in.items()}
        heap = [i for i, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            n = heapq.heappop(heap)
            order.append(n)
            for m in self._out[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    heapq.heappush(heap, m)
        if len(order) != len(self.nodes):
            raise InvalidNetworkError("network contains a directed cycle")
        return order

    def descendants(self, node_id) -> set[int]:
        seen = set()
        stack = list(self._out[node_id])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(self._out[n])
        return seen

    def concept_depths(self) -> dict[int, int]:
        """Longest path from any source to each node, counted in concept nodes."""
        depth = {}
        for n in self.topological_order():
            own = 1 if self.nodes[n].kind is NodeKind.CONCEPT else 0
            depth[n] = own + max((depth[p] for p in self._in[n]), default=0)
        return depth

    def depth(self):
        d = self.concept_depths()
        return max((d[o] for o in self.outputs), default=0)

    def max_fan_in(self):
        return max((len(self._in[c]) for c in self.concepts), default=0)

    def copy(self) -> "Network":
        new = Network.__new__(Network)
        new.n_inputs, new.n_outputs = self.n_inputs, self.n_outputs
        new.sigma_min, new.step, new._next_id = self.sigma_min, self.step, self._next_id
        new.inputs, new.outputs = list(self.inputs), list(self.outputs)
        new.nodes, new.edges, new._in, new._out = {}, {}, {}, {}
        new._plan = None
        for i, n in self.nodes.items():
            c = Node(n.id, n.kind, mu=n.mu, sigma=n.sigma, theta=n.theta,
                     created_at=n.created_at)
            c.activation_sum, c.last_activation = n.activation_sum, n.last_activation
            c._net = new
            new.nodes[i] = c
            new._in[i], new._out[i] = {}, {}
        for (s, d), e in self.edges.items():
            c = Edge(s, d, e.weight, e.frozen)
            c._net = new
            new.edges[(s, d)] = c
            new._out[s][d] = c
            new._in[d][s] = c
        return new

    def to_dict(self) -> dict:
        """JSON-ready snapshot; :meth:`from_dict` restores it exactly."""
        return {
            "n_inputs": self.n_inputs, "n_outputs": self.n_outputs,
            "sigma_min": self.sigma_min, "step": self.step, "next_id": self._next_id,
            "inputs": list(self.inputs), "outputs": list(self.outputs),
            "nodes": [{"id": n.id, "kind": n.kind.name.lower(), "mu": n.mu, "sigma": n.sigma,
                       "theta": n.theta, "created_at": n.created_at,
                       "activation_sum": n.activation_sum,
                       "last_activation": n.last_activation}
                      for n in self.nodes.values()],
            "edges": [{"src": e.src, "dst": e.dst, "weight": e.weight, "frozen": e.frozen}
                      for e in self.edges.values()],
        }

    @classmethod
    def from_dict(cls, d) -> "Network":
        try:
            new = cls.__new__(cls)
            new.n_inputs, new.n_outputs = int(d["n_inputs"]), int(d["n_outputs"])
            new.sigma_min, new.step = float(d["sigma_min"]), int(d["step"])
            new._next_id = int(d["next_id"])
            new.inputs, new.outputs = list(d["inputs"]), list(d["outputs"])
            new.nodes, new.edges, new._in, new._out = {}, {}, {}, {}
            new._plan = None
            for nd in d["nodes"]:
                node = Node(nd["id"], NodeKind[nd["kind"].upper()], mu=nd["mu"],
                            sigma=nd["sigma"], theta=nd["theta"], created_at=nd["created_at"])
                node.activation_sum = float(nd["activation_sum"])
                node.last_activation = float(nd["last_activation"])
                node._net = new
                new.nodes[node.id] = node
                new._in[node.id], new._out[node.id] = {}, {}
            for ed in d["edges"]:
                new.add_edge(ed["src"], ed["dst"], ed["weight"], ed["frozen"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidNetworkError(f"malformed network snapshot: {exc}") from exc
        return new

    # -- compilation ------------------------------------------------------

    def plan(self) -> Plan:
        if self._plan is None:
            self._plan = self._compile()
        return self._plan

    def _compile(self) -> Plan:
        order = self.topological_order()
        pos = {n: i for i, n in enumerate(order)}
        size = len(order)
        kind = np.empty(size, dtype=np.int64)
        aux = np.full(size, -1, dtype=np.int64)
        p1 = np.zeros(size)
        p2 = np.ones(size)
        in_ptr = np.zeros(size + 1, dtype=np.int64)
        srcs, ws, frozen = [], [], []
        slot = {}
        input_index = {n: k for k, n in enumerate(self.inputs)}
        output_index = {n: k for k, n in enumerate(self.outputs)}
        for i, n in enumerate(order):
            node = self.nodes[n]
            kind[i] = node.kind
            if node.kind is NodeKind.VALUE:
                p1[i], p2[i] = node.mu, node.sigma
            elif node.kind is NodeKind.CONCEPT:
                p1[i] = node.theta
            elif node.kind is NodeKind.INPUT:
                aux[i] = input_index[n]
            else:
                aux[i] = output_index[n]
            for s, e in self._in[n].items():
                slot[(s, n)] = len(srcs)
                srcs.append(pos[s])
                ws.append(e.weight)
                frozen.append(e.frozen)
            in_ptr[i + 1] = len(srcs)
        return Plan(
            order=order, pos=pos, kind=kind, aux=aux, p1=p1, p2=p2, in_ptr=in_ptr,
            in_src=np.asarray(srcs, dtype=np.int64), in_w=np.asarray(ws, dtype=float),
            in_frozen=np.asarray(frozen, dtype=bool), slot=slot,
            out_pos=np.asarray([pos[o] for o in self.outputs], dtype=np.int64),
            in_pos=np.asarray([pos[i] for i in self.inputs], dtype=np.int64),
            concept_pos=[(i, self.nodes[n]) for i, n in enumerate(order)
                         if kind[i] == K_CONCEPT],
        )

    def __repr__(self):
        return (f"Network(inputs={self.n_inputs}, outputs={self.n_outputs}, "
                f"concepts={self.n_concepts()}, nodes={len(self.nodes)}, "
                f"edges={len(self.edges)}, step={self.step})")


class ActivationMap:
    """Activations of one forward pass, indexed by node id.

    ``yhat`` is the softmax output vector and ``z`` the output pre-activations.
    """

    def __init__(self, plan: Plan, acts: np.ndarray, z: np.ndarray):
        self.plan = plan
        self.acts = acts
        self.z = z
        self.yhat = acts[plan.out_pos]

    def __getitem__(self, node_id):
        return float(self.acts[self.plan.pos[node_id]])

    def __contains__(self, node_id):
        return node_id in self.plan.pos

    def __len__(self):
        return len(self.plan.order)

    def as_dict(self) -> dict[int, float]:
        return {n: float(self.acts[i]) for i, n in enumerate(self.plan.order)}


def init_from_first_point(x: Sequence[float], y: Sequence[float], sigma_min=SIGMA_MIN) -> Network:
    """Blank network with ``len(x)`` inputs and ``len(y)`` outputs and no edges."""
    return Network(len(x), len(y), sigma_min=sigma_min)


def _as_input(net, x):
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.n_inputs:
        raise InvalidDimensionError(
            f"expected input of length {net.n_inputs}, got shape {x.shape}")
    return x


def forward(net: Network, x, record=True) -> ActivationMap:
    """Evaluate the network on ``x``.

    With ``record`` the concept nodes' ``activation_sum`` and every node's
    ``last_activation`` are updated; pass ``record=False`` for measurement
    passes that must not disturb the forgetting statistics.
    """
    x = _as_input(net, x)
    plan = net.plan()
    acts, z = kernels.forward(*plan.kernel_args(), x)
    am = ActivationMap(plan, acts, z)
    if record:
        for i, node in plan.concept_pos:
            a = float(acts[i])
            node.last_activation = a
            node.activation_sum += a
    return am


def predict_batch(net: Network, X) -> np.ndarray:
    """Output probability vectors for each row of ``X``; never records."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise InvalidDimensionError(
            f"expected inputs of shape (n, {net.n_inputs}), got {X.shape}")
    return kernels.forward_batch(*net.plan().kernel_args(), X)


def prediction(yhat) -> int:
    """Argmax with ties resolved to the lowest index."""
    yhat = np.asarray(yhat)
    if yhat.size == 0:
        raise InvalidDimensionError("empty probability vector")
    return int(np.argmax(yhat))


def extension_set(net: Network, acts: ActivationMap, threshold: float,
                  inputs_always=False) -> tuple[int, ...]:
    """Deepest active concept/input nodes: an antichain of the DAG order.

    With ``inputs_always`` every input node counts as active regardless of
    its value.  Falls back to all input nodes when nothing is active.
    """
    plan = acts.plan
    a = acts.acts
    active = set()
    for i, n in enumerate(plan.order):
        k = plan.kind[i]
        if k == K_CONCEPT or k == K_INPUT:
            if a[i] > threshold or (inputs_always and k == K_INPUT):
                active.add(n)
    if not active:
        return tuple(net.inputs)
    # covered[n]: some strict descendant of n is active
    covered = {}
    out = net._out
    for n in reversed(plan.order):
        covered[n] = any(c in active or covered[c] for c in out[n])
    return tuple(sorted(n for n in active if not covered[n]))


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    ids: tuple = ()

    def __str__(self):
        return f"{self.rule}: {self.message}"


def validate(net: Network) -> Violation | None:
    """Check the connectivity contract; return the first violation or ``None``."""
    for (s, d), e in net.edges.items():
        if s not in net.nodes or d not in net.nodes:
            return Violation("dangling edge", f"edge {s}->{d} references a removed node", (s, d))
    try:
        net.topological_order()
    except InvalidNetworkError:
        return Violation("acyclic", "network contains a directed cycle")
    outputs = set(net.outputs)
    for n, node in net.nodes.items():
        ins, outs = net._in[n], net._out[n]
        kind = node.kind
        if kind is NodeKind.INPUT and ins:
            return Violation("input has no incoming", f"input {n} has incoming edges", (n,))
        if kind is NodeKind.OUTPUT and outs:
            return Violation("output has no outgoing", f"output {n} has outgoing edges", (n,))
        if kind is NodeKind.CONCEPT:
            for s in ins:
                if net.nodes[s].kind is not NodeKind.VALUE:
                    return Violation("concept incoming must be value",
                                     f"edge {s}->{n} into concept {n} is not from a value node",
                                     (s, n))
            for d in outs:
                if net.nodes[d].kind not in (NodeKind.OUTPUT, NodeKind.VALUE):
                    return Violation("concept outgoing must be output or value",
                                     f"edge {n}->{d} from concept {n}", (n, d))
            missing = outputs.difference(outs)
            if missing:
                return Violation("concept connects to all outputs",
                                 f"concept {n} lacks edges to outputs {sorted(missing)}", (n,))
        if kind is NodeKind.VALUE:
            if len(ins) != 1:
                return Violation("value has one incoming",
                                 f"value {n} has {len(ins)} incoming edges", (n,))
            (s,) = ins
            if net.nodes[s].kind not in (NodeKind.CONCEPT, NodeKind.INPUT):
                return Violation("value incoming from concept or input",
                                 f"value {n} is fed by {net.nodes[s].kind.name.lower()} {s}",
                                 (s, n))
            if len(outs) != 1:
                return Violation("value has one outgoing",
                                 f"value {n} has {len(outs)} outgoing edges", (n,))
            (d,) = outs
            if net.nodes[d].kind is not NodeKind.CONCEPT:
                return Violation("value outgoing to concept",
                                 f"value {n} feeds non-concept {d}", (n, d))
            if not node.sigma >= net.sigma_min:
                return Violation("sigma floor", f"value {n} has sigma {node.sigma}", (n,))
    return None


def remove_concept(net: Network, c: int) -> list[int]:
    """Remove concept ``c`` with its value nodes; cascade to orphaned concepts.

    Returns the ids of every removed node.
    """
    node = net.nodes.get(c)
    if node is None or node.kind is not NodeKind.CONCEPT:
        raise InvalidTargetError(f"node {c} is not a concept node")
    removed = []
    work = [c]
    while work:
        c = work.pop()
        if c not in net.nodes:
            continue
        doomed = [c]
        doomed.extend(net._in[c])
        downstream = []
        for v in net._out[c]:
            if net.nodes[v].kind is NodeKind.VALUE:
                doomed.append(v)
                downstream.extend(net._out[v])
        for n in doomed:
            net.remove_node(n)
        removed.extend(doomed)
        for d in downstream:
            if d in net.nodes and net.nodes[d].kind is NodeKind.CONCEPT and not net._in[d]:
                work.append(d)
    return removed


def iter_concepts_deepest_first(net: Network) -> Iterable[int]:
    depth = net.concept_depths()
    return sorted(net.concepts, key=lambda n: (-depth[n], n))
