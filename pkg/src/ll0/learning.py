"""Cross-entropy backpropagation and gradient descent on the dynamic graph.

Parameters are addressed by handles: ``("theta", c)``, ``("mu", v)``,
``("sigma", v)`` and ``("w", src, dst)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, InvalidDimensionError, InvalidNetworkError
from .graph import K_CONCEPT, K_VALUE, ActivationMap, Network, NodeKind, forward

EPS = 1e-12

GradientMap = dict


@dataclass
class LearnConfig:
    learning_rate: float = 0.01

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")


def loss(yhat, y) -> float:
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    if yhat.shape != y.shape:
        raise InvalidDimensionError(f"prediction shape {yhat.shape} != target shape {y.shape}")
    return float(-np.sum(y * np.log(yhat + EPS)))


def output_delta(yhat, y) -> np.ndarray:
    """dE/dz for softmax outputs under the epsilon-guarded cross-entropy.

    Reduces to ``yhat - y`` as epsilon goes to zero.
    """
    g = -np.asarray(y, dtype=float) / (yhat + EPS)
    return yhat * (g - np.dot(g, yhat))


def trainable_handles(net: Network) -> list[tuple]:
    handles = []
    for n, node in net.nodes.items():
        if node.kind is NodeKind.CONCEPT:
            handles.append(("theta", n))
        elif node.kind is NodeKind.VALUE:
            handles.append(("mu", n))
            handles.append(("sigma", n))
    handles.extend(("w", s, d) for (s, d), e in net.edges.items() if not e.frozen)
    return handles


def backward(net: Network, acts: ActivationMap, y) -> GradientMap:
    """Gradients of the loss w.r.t. every trainable parameter.

    Frozen edges get no entry but still carry gradient to their source.
    """
    plan = acts.plan
    if plan is not net.plan():
        raise InvalidNetworkError("activation map does not belong to the current network")
    y = np.asarray(y, dtype=float)
    if y.shape != acts.yhat.shape:
        raise InvalidDimensionError(f"target shape {y.shape} != output shape {acts.yhat.shape}")
    dz = output_delta(acts.yhat, y)
    g1, g2, gw = kernels.backward(*plan.kernel_args(), acts.acts, dz)
    grads = {}
    kind = plan.kind.tolist()
    g1, g2 = g1.tolist(), g2.tolist()
    for i, n in enumerate(plan.order):
        k = kind[i]
        if k == K_CONCEPT:
            grads[("theta", n)] = g1[i]
        elif k == K_VALUE:
            grads[("mu", n)] = g1[i]
            grads[("sigma", n)] = g2[i]
    frozen = plan.in_frozen.tolist()
    gw = gw.tolist()
    for (s, d), j in plan.slot.items():
        if not frozen[j]:
            grads[("w", s, d)] = gw[j]
    return grads


def get_param(net: Network, handle) -> float:
    if handle[0] == "w":
        return net.edges[(handle[1], handle[2])].weight
    return getattr(net.nodes[handle[1]], handle[0])


def set_param(net: Network, handle, value):
    if handle[0] == "w":
        net.edges[(handle[1], handle[2])].weight = value
    else:
        setattr(net.nodes[handle[1]], handle[0], value)


def sgd_step(net: Network, grads: GradientMap, cfg: LearnConfig) -> Network:
    """In-place ``p -= lr * dE/dp``; sigmas are clamped to the network floor.

    The compiled plan, when current, is patched rather than rebuilt.
    """
    lr = cfg.learning_rate
    plan = net._plan
    setattr_ = object.__setattr__
    for handle, g in grads.items():
        if g == 0.0:
            continue
        tag = handle[0]
        if tag == "w":
            edge = net.edges[(handle[1], handle[2])]
            if edge.frozen:
                continue
            setattr_(edge, "weight", edge.weight - lr * g)
            if plan is not None:
                plan.in_w[plan.slot[edge.key]] = edge.weight
            continue
        node = net.nodes[handle[1]]
        if tag == "sigma":
            new = max(node.sigma - lr * g, net.sigma_min)
            setattr_(node, "sigma", new)
            if plan is not None:
                plan.p2[plan.pos[node.id]] = new
        else:
            new = getattr(node, tag) - lr * g
            setattr_(node, tag, new)
            if plan is not None:
                plan.p1[plan.pos[node.id]] = new
    return net


def precise_loss(net: Network, x, y) -> float:
    """Loss evaluated in extended precision, independently of the kernels.

    Central differences of a double-precision loss bottom out near 1e-11
    absolute error, which swamps gradients of order 1e-8; the wider float
    pushes that floor far below the comparison tolerance.
    """
    ld = np.longdouble
    x = np.asarray(x, dtype=ld)
    acts = {}
    for n in net.topological_order():
        node = net.nodes[n]
        k = node.kind
        if k is NodeKind.INPUT:
            acts[n] = x[net.inputs.index(n)]
            continue
        s = ld(0)
        for src, e in net._in[n].items():
            s += ld(e.weight) * acts[src]
        if k is NodeKind.VALUE:
            d = s - ld(node.mu)
            acts[n] = np.exp(-d * d / (ld(2) * ld(node.sigma) ** 2))
        elif k is NodeKind.CONCEPT:
            acts[n] = ld(1) / (ld(1) + np.exp(-(s + ld(node.theta))))
        else:
            acts[n] = s
    z = np.array([acts[o] for o in net.outputs], dtype=ld)
    e = np.exp(z - z.max())
    yhat = e / e.sum()
    return -np.sum(np.asarray(y, dtype=ld) * np.log(yhat + ld(EPS)))


def gradient_check(net: Network, x, y, h: float = 1e-5, return_details=False):
    """Worst relative error between ``backward`` and central differences.

    The differences are taken on :func:`precise_loss`.  Parameters where
    both estimates are below 1e-8 in magnitude are skipped.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"h must lie in [1e-7, 1e-3], got {h}")
    acts = forward(net, x, record=False)
    analytic = backward(net, acts, y)
    worst, details = 0.0, {}
    for handle, a in analytic.items():
        p0 = get_param(net, handle)
        set_param(net, handle, p0 + h)
        e_plus = precise_loss(net, x, y)
        set_param(net, handle, p0 - h)
        e_minus = precise_loss(net, x, y)
        set_param(net, handle, p0)
        num = float((e_plus - e_minus) / (2.0 * h))
        scale = max(abs(a), abs(num))
        if scale < 1e-8:
            continue
        err = abs(a - num) / scale
        details[handle] = (a, num, err)
        worst = max(worst, err)
    if return_details:
        return worst, details
    return worst
