"""Structural plasticity: extension, generalization and forgetting."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateActivationError
from .graph import (
    ActivationMap,
    Network,
    NodeKind,
    extension_set,
    forward,
    iter_concepts_deepest_first,
    remove_concept,
)

FORGET_MODES = ("size-limit", "threshold", "off")


def _sigmoid(s):
    if s >= 0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


@dataclass
class RuleConfig:
    act_threshold: float = 0.5
    gen_min_active: int = 2
    sigma_init: float = 0.3
    and_gain: float = 10.0
    oneshot_margin: float = 1.0
    forget_mode: str = "size-limit"
    max_concepts: int = 300
    perf_threshold: float = 0.01
    grace_period: int = 50
    gate_inputs: bool = False

    def __post_init__(self):
        if not 0.0 < self.act_threshold < 1.0:
            raise ConfigError(f"act_threshold must lie in (0, 1), got {self.act_threshold}")
        if self.gen_min_active < 2:
            raise ConfigError(f"gen_min_active must be >= 2, got {self.gen_min_active}")
        for name in ("sigma_init", "and_gain", "oneshot_margin"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.forget_mode not in FORGET_MODES:
            raise ConfigError(f"forget_mode must be one of {FORGET_MODES}, got {self.forget_mode!r}")
        if self.max_concepts < 0:
            raise ConfigError(f"max_concepts must be >= 0, got {self.max_concepts}")
        if not 0.0 < self.perf_threshold < 1.0:
            raise ConfigError(f"perf_threshold must lie in (0, 1), got {self.perf_threshold}")
        if self.grace_period < 0:
            raise ConfigError(f"grace_period must be >= 0, got {self.grace_period}")


@dataclass
class RuleEvent:
    step: int
    kind: str  # "extended" | "generalized" | "forgot"
    nodes_added: int = 0
    nodes_removed: int = 0
    trigger: tuple = field(default_factory=tuple)

    def to_dict(self):
        d = asdict(self)
        d["trigger"] = list(self.trigger)
        return d


def _fresh(net, x, acts):
    if acts is None or acts.plan is not net.plan():
        return forward(net, x, record=False)
    return acts


def extend(net: Network, x, y, acts: ActivationMap | None, cfg: RuleConfig) -> RuleEvent:
    """Memorize ``(x, y)`` with a new AND-like concept over the extension set.

    The concept's output weights are chosen so the network classifies ``x``
    as ``argmax(y)`` right away; those weights are frozen.
    """
    acts = _fresh(net, x, acts)
    target = int(np.argmax(y))
    S = extension_set(net, acts, cfg.act_threshold, inputs_always=not cfg.gate_inputs)
    k = cfg.and_gain
    c = net.add_node(NodeKind.CONCEPT, theta=-k * (len(S) - 0.5))
    pre = c.theta
    for n in S:
        v = net.add_node(NodeKind.VALUE, mu=acts[n], sigma=cfg.sigma_init)
        net.add_edge(n, v.id, 1.0, frozen=True)
        net.add_edge(v.id, c.id, k)
        # the new value node sits exactly at its peak: activation 1
        pre += k
    a_c = _sigmoid(pre)
    if a_c < 1e-6:
        raise DegenerateActivationError(f"new concept {c.id} has activation {a_c}")
    z = acts.z
    w_target = (float(np.max(z)) - float(z[target]) + cfg.oneshot_margin) / a_c
    for j, o in enumerate(net.outputs):
        net.add_edge(c.id, o, w_target if j == target else 0.0, frozen=True)
    return RuleEvent(net.step, "extended", nodes_added=len(S) + 1, trigger=tuple(S))


def generalize(net: Network, acts: ActivationMap, cfg: RuleConfig) -> RuleEvent | None:
    """Split the co-activated parents of one concept into a new intermediate concept.

    The first eligible concept (deepest first) is rewired so that its
    pre-activation at the current operating point is unchanged.  Returns
    ``None`` when no concept qualifies.
    """
    if acts.plan is not net.plan():
        raise ValueError("activation map is stale; run forward on the current network")
    thr = cfg.act_threshold
    for c in iter_concepts_deepest_first(net):
        parents = net.in_edges(c)
        active = [e for e in parents if acts[e.src] > thr]
        if len(active) < cfg.gen_min_active or len(active) == len(parents):
            continue
        drive = 0.0
        wsum = 0.0
        for e in active:
            drive += e.weight * acts[e.src]
            wsum += e.weight
        theta = -wsum + 0.5 * wsum / len(active)
        a_sub = _sigmoid(theta + drive)
        sub = net.add_node(NodeKind.CONCEPT, theta=theta)
        for e in active:
            w, frozen = e.weight, e.frozen
            net.remove_edge(e.src, c)
            net.add_edge(e.src, sub.id, w, frozen=frozen)
        # mu = a_sub puts the new value node at its peak (activation 1), so
        # the bridging weight equals the detached drive and c is unchanged
        v = net.add_node(NodeKind.VALUE, mu=a_sub, sigma=cfg.sigma_init)
        net.add_edge(sub.id, v.id, 1.0, frozen=True)
        net.add_edge(v.id, c, drive)
        for o in net.outputs:
            net.add_edge(sub.id, o, 0.0)
        return RuleEvent(net.step, "generalized", nodes_added=2,
                         trigger=(c,) + tuple(e.src for e in active))
    return None


def performance(net: Network, c: int, t: int | None = None) -> float:
    """Mean recorded activation of concept ``c`` since its creation."""
    return net.nodes[c].performance(net.step if t is None else t)


def forget(net: Network, cfg: RuleConfig) -> RuleEvent | None:
    """Remove poorly performing concepts according to ``cfg.forget_mode``.

    Concepts younger than ``cfg.grace_period`` steps are never removed.
    """
    if cfg.forget_mode == "off":
        return None
    t = net.step

    def eligible():
        out = []
        for c in net.concepts:
            node = net.nodes[c]
            if t - node.created_at > cfg.grace_period:
                out.append((node.performance(t), node.created_at, c))
        return out

    chosen, removed = [], 0
    if cfg.forget_mode == "size-limit":
        while net.n_concepts() > cfg.max_concepts:
            cands = eligible()
            if not cands:
                break
            _, _, c = min(cands)
            chosen.append(c)
            removed += len(remove_concept(net, c))
    else:
        for p, _, c in sorted(eligible()):
            if p < cfg.perf_threshold and c in net.nodes:
                chosen.append(c)
                removed += len(remove_concept(net, c))
    if not chosen:
        return None
    return RuleEvent(t, "forgot", nodes_removed=removed, trigger=tuple(chosen))
