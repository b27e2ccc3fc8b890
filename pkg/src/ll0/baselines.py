"""Static fully connected baselines (FC0, FC10, FC10*2, FC10*3) trained with minibatch SGD."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidDimensionError

HIDDEN = {"fc0": (), "fc10": (10,), "fc10x2": (10, 10), "fc10x3": (10, 10, 10)}


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_layers: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 2:
            raise ConfigError(f"bad dimensions {self.input_dim}->{self.output_dim}")
        if any(w <= 0 for w in self.hidden_layers):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden_layers}")

    @classmethod
    def named(cls, model: str, input_dim, output_dim, seed=0):
        try:
            hidden = HIDDEN[model]
        except KeyError:
            raise ConfigError(f"unknown baseline {model!r}; expected one of {sorted(HIDDEN)}") from None
        return cls(input_dim, output_dim, hidden, seed)

    @property
    def widths(self):
        return (self.input_dim, *self.hidden_layers, self.output_dim)

    def parameter_count(self):
        w = self.widths
        return sum(a * b + b for a, b in zip(w[:-1], w[1:]))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @property
    def parameter_count(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def _forward(self, X):
        hs = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if i == last else np.maximum(z, 0.0)
            hs.append(h)
        return hs

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.spec.input_dim:
            raise InvalidDimensionError(f"expected {self.spec.input_dim} features, got {X.shape[1]}")
        return _softmax(self._forward(X)[-1])

    def loss(self, X, Y):
        """Mean cross-entropy over the batch."""
        z = self._forward(X)[-1]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-(Y * logp).sum() / X.shape[0])

    def gradients(self, X, Y):
        hs = self._forward(X)
        delta = (_softmax(hs[-1]) - Y) / X.shape[0]
        gW, gb = [None] * len(self.weights), [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            gW[i] = hs[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (hs[i] > 0)
        return gW, gb

    def copy(self):
        return Mlp(self.spec, [W.copy() for W in self.weights], [b.copy() for b in self.biases])


def mlp_init(spec: MlpSpec) -> Mlp:
    """Glorot-uniform weights from a seeded generator; zero biases."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    w = spec.widths
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec, weights, biases)


def mlp_train_epoch(m: Mlp, X, Y, batch=10, lr=0.01) -> Mlp:
    """One in-order pass of minibatch SGD; the last short batch is used as-is."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(X) == 0:
        raise InvalidDimensionError("empty training set")
    if X.shape[1] != m.spec.input_dim or Y.shape[1] != m.spec.output_dim:
        raise InvalidDimensionError(
            f"data {X.shape[1]}->{Y.shape[1]} does not match model "
            f"{m.spec.input_dim}->{m.spec.output_dim}")
    for start in range(0, len(X), batch):
        xb, yb = X[start:start + batch], Y[start:start + batch]
        gW, gb = m.gradients(xb, yb)
        for i in range(len(m.weights)):
            m.weights[i] -= lr * gW[i]
            m.biases[i] -= lr * gb[i]
    return m


def mlp_eval(m: Mlp, X, labels) -> float:
    from .metering import accuracy

    return accuracy(m.predict_proba(X), np.asarray(labels))


def _relu_pattern(m: Mlp, X):
    return [h > 0 for h in m._forward(X)[1:-1]]


def mlp_gradient_check(m: Mlp, X, Y, h=1e-5, shrink=10.0, tries=4) -> float:
    """Worst relative error of analytic MLP gradients against central differences.

    A difference whose probes flip any ReLU is straddling a kink, so the step is
    shrunk until both probes share the unperturbed pattern. Coordinates with no
    such step within ``tries`` shrinks sit on a kink and are skipped.
    """
    gW, gb = m.gradients(X, Y)
    base = _relu_pattern(m, X)
    same = lambda pat: all(np.array_equal(a, b) for a, b in zip(pat, base))
    worst = 0.0
    for params, grads in ((m.weights, gW), (m.biases, gb)):
        for P, G in zip(params, grads):
            it = np.nditer(P, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                p0 = P[idx]
                step, num = h, None
                for _ in range(tries + 1):
                    P[idx] = p0 + step
                    ep, pp = m.loss(X, Y), _relu_pattern(m, X)
                    P[idx] = p0 - step
                    em, pm = m.loss(X, Y), _relu_pattern(m, X)
                    P[idx] = p0
                    if same(pp) and same(pm):
                        num = (ep - em) / (2 * step)
                        break
                    step /= shrink
                if num is None:
                    continue
                a = G[idx]
                scale = max(abs(a), abs(num))
                if scale < 1e-8:
                    continue
                worst = max(worst, abs(a - num) / scale)
    return worst
