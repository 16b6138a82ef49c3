"""Small feature-based classifiers for the built-in scorers.

All models standardise their inputs (clipped to +-8 standard deviations) and
are fit by full-batch Adam on an L2-regularised log loss starting from zero
weights.
Zero weights make every binary model output exactly 0.5, which is also what
labels without training data fall back to.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Hyper:
    learning_rate: float = 1e-2
    epochs: int = 200
    l2: float = 1e-4


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-9] = 1.0
        return cls(mean, scale)

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, X):
        z = (np.atleast_2d(X) - self.mean) / self.scale
        np.clip(z, -8.0, 8.0, out=z)
        return z


@dataclass
class LogisticModel:
    """Binary classifier: probability that a feature vector is a positive."""

    std: Standardizer
    w: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @classmethod
    def untrained(cls, dim):
        return cls(Standardizer.identity(dim), np.zeros(dim))

    @classmethod
    def fit(cls, X, y, hyper=Hyper(), balanced=True):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        model = cls(Standardizer.fit(X), np.zeros(X.shape[1]))
        Z = model.std.transform(X)
        if balanced and 0 < y.sum() < len(y):
            # mean loss over positives plus mean loss over negatives
            sw = np.where(y > 0.5, 0.5 / y.sum(), 0.5 / (len(y) - y.sum()))
        else:
            sw = np.full(len(y), 1.0 / len(y))
        opt = _Adam(hyper.learning_rate)
        for _ in range(hyper.epochs):
            err = (_sigmoid(Z @ model.w + model.b[0]) - y) * sw
            gw = Z.T @ err + hyper.l2 * model.w
            gb = np.array([err.sum()])
            opt.step([model.w, model.b], [gw, gb])
        return model

    def predict(self, X):
        return _sigmoid(self.std.transform(X) @ self.w + self.b[0])

    def arrays(self):
        return [self.std.mean, self.std.scale, self.w, self.b]

    @classmethod
    def from_arrays(cls, arrays):
        mean, scale, w, b = arrays
        return cls(Standardizer(mean, scale), w, b)


@dataclass
class SoftmaxModel:
    """Multinomial classifier over a fixed class list."""

    std: Standardizer
    W: np.ndarray
    b: np.ndarray

    @classmethod
    def untrained(cls, dim, n_classes):
        return cls(Standardizer.identity(dim), np.zeros((dim, n_classes)), np.zeros(n_classes))

    @classmethod
    def fit(cls, X, y, n_classes, hyper=Hyper()):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        model = cls(Standardizer.fit(X), np.zeros((X.shape[1], n_classes)), np.zeros(n_classes))
        Z = model.std.transform(X)
        onehot = np.zeros((len(y), n_classes))
        onehot[np.arange(len(y)), y] = 1.0
        opt = _Adam(hyper.learning_rate)
        for _ in range(hyper.epochs):
            err = (_softmax(Z @ model.W + model.b) - onehot) / len(y)
            gW = Z.T @ err + hyper.l2 * model.W
            gb = err.sum(axis=0)
            opt.step([model.W, model.b], [gW, gb])
        return model

    def predict(self, X):
        return _softmax(self.std.transform(X) @ self.W + self.b)

    def arrays(self):
        return [self.std.mean, self.std.scale, self.W, self.b]

    @classmethod
    def from_arrays(cls, arrays):
        mean, scale, W, b = arrays
        return cls(Standardizer(mean, scale), W, b)


class BoundedLinearModel(LogisticModel):
    """Regressor onto [0, 1]: a squashed linear model fit to fractional targets."""

    @classmethod
    def fit(cls, X, y, hyper=Hyper(), balanced=False):
        return super().fit(X, y, hyper, balanced=False)
