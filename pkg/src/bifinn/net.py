"""Two-hidden-layer tanh network with a linear output layer.

Parameters live in one flat vector ``theta`` ordered layer by layer, weights
before biases::

    W1 (H1 x n_in), b1 (H1), W2 (H2 x H1), b2 (H2), W3 (n_out x H2), b3 (n_out)

with every weight matrix flattened row-major.  Inputs and outputs pass through
per-component z-score normalizers; training and the Jacobian operate in the
normalized space.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MIN_STD = 1e-12


@dataclass(frozen=True)
class NetLayout:
    n_in: int
    H1: int
    H2: int
    n_out: int = 1

    def __post_init__(self):
        if min(self.n_in, self.H1, self.H2, self.n_out) < 1:
            raise ValueError(f"all layer widths must be >= 1, got {self}")

    @classmethod
    def square(cls, n_in: int, H: int, n_out: int = 1) -> "NetLayout":
        return cls(n_in, H, H, n_out)

    @property
    def shapes(self):
        return [(self.H1, self.n_in), (self.H1,), (self.H2, self.H1), (self.H2,),
                (self.n_out, self.H2), (self.n_out,)]

    @property
    def n_params(self) -> int:
        return (self.n_in + 1) * self.H1 + (self.H1 + 1) * self.H2 + (self.H2 + 1) * self.n_out


@dataclass(frozen=True)
class ShallowNet:
    layout: NetLayout
    theta: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def __post_init__(self):
        if self.theta.shape != (self.layout.n_params,):
            raise ValueError(f"theta has shape {self.theta.shape}, layout needs {self.layout.n_params}")
        if np.any(self.x_std <= 0) or np.any(self.y_std <= 0):
            raise ValueError("normalizer standard deviations must be positive")

    def with_theta(self, theta: np.ndarray) -> "ShallowNet":
        return replace(self, theta=np.array(theta, dtype=float))

    def normalize_x(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_std

    def normalize_y(self, Y):
        return (np.asarray(Y, dtype=float) - self.y_mean) / self.y_std

    def denormalize_y(self, Yn):
        return Yn * self.y_std + self.y_mean

    def __call__(self, x):
        return forward(self, x)


def unpack(theta: np.ndarray, layout: NetLayout) -> list[np.ndarray]:
    parts, i = [], 0
    for shape in layout.shapes:
        n = int(np.prod(shape))
        parts.append(theta[i:i + n].reshape(shape))
        i += n
    return parts


def init_net(layout: NetLayout, seed: int) -> ShallowNet:
    """Glorot-uniform weights, zero biases, identity normalizers."""
    rng = np.random.default_rng(seed)
    chunks = []
    for shape in layout.shapes:
        if len(shape) == 2:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=shape).ravel())
        else:
            chunks.append(np.zeros(shape))
    return ShallowNet(layout, np.concatenate(chunks),
                      np.zeros(layout.n_in), np.ones(layout.n_in),
                      np.zeros(layout.n_out), np.ones(layout.n_out))


def _moments(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = A.mean(axis=0)
    std = A.std(axis=0)  # population convention (ddof=0)
    std[std < MIN_STD] = 1.0
    return mean, std


def fit_normalizers(net: ShallowNet, X, Y) -> ShallowNet:
    """Freeze z-score statistics of the training inputs and targets into ``net``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if X.shape[0] == 0:
        raise ValueError("cannot fit normalizers on an empty training set")
    xm, xs = _moments(X)
    ym, ys = _moments(Y)
    return replace(net, x_mean=xm, x_std=xs, y_mean=ym, y_std=ys)


def forward_normalized(theta: np.ndarray, layout: NetLayout, Xn: np.ndarray) -> np.ndarray:
    """Network output in normalized units for a batch of normalized inputs."""
    W1, b1, W2, b2, W3, b3 = unpack(theta, layout)
    h1 = np.tanh(Xn @ W1.T + b1)
    h2 = np.tanh(h1 @ W2.T + b2)
    return h2 @ W3.T + b3


def forward(net: ShallowNet, x) -> np.ndarray:
    """Evaluate the net; accepts one input vector or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != net.layout.n_in:
        raise ValueError(f"input width {X.shape[1]} != n_in={net.layout.n_in}")
    y = net.denormalize_y(forward_normalized(net.theta, net.layout, net.normalize_x(X)))
    return y[0] if single else y


def jacobian_normalized(theta: np.ndarray, layout: NetLayout, Xn: np.ndarray):
    """Outputs and d(output)/d(theta) in normalized space.

    Returns ``(out, J)`` with ``out`` of shape (n, n_out) and ``J`` of shape
    (n * n_out, n_params); row ``s * n_out + k`` belongs to sample ``s``,
    output ``k``.
    """
    W1, b1, W2, b2, W3, b3 = unpack(theta, layout)
    n = Xn.shape[0]
    n_out = layout.n_out
    h1 = np.tanh(Xn @ W1.T + b1)
    h2 = np.tanh(h1 @ W2.T + b2)
    out = h2 @ W3.T + b3

    # back-propagate each output unit separately: delta2[s, k, j]
    delta2 = W3[None, :, :] * (1.0 - h2**2)[:, None, :]
    delta1 = (delta2 @ W2) * (1.0 - h1**2)[:, None, :]
    eye = np.eye(n_out)

    blocks = [
        (delta1[:, :, :, None] * Xn[:, None, None, :]).reshape(n, n_out, -1),
        delta1,
        (delta2[:, :, :, None] * h1[:, None, None, :]).reshape(n, n_out, -1),
        delta2,
        (eye[None, :, :, None] * h2[:, None, None, :]).reshape(n, n_out, -1),
        np.broadcast_to(eye, (n, n_out, n_out)),
    ]
    J = np.concatenate(blocks, axis=2).reshape(n * n_out, layout.n_params)
    return out, J


def jacobian(net: ShallowNet, X) -> np.ndarray:
    """Jacobian of the normalized output w.r.t. ``theta``, sample-major rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[1] != net.layout.n_in:
        raise ValueError(f"input width {X.shape[1]} != n_in={net.layout.n_in}")
    return jacobian_normalized(net.theta, net.layout, net.normalize_x(X))[1]


def lipschitz_bound(net: ShallowNet) -> float:
    """Upper bound on the Lipschitz constant of ``forward`` (spectral norms, |tanh'| <= 1)."""
    W1, _, W2, _, W3, _ = unpack(net.theta, net.layout)
    L = np.linalg.norm(W1 / net.x_std[None, :], 2) * np.linalg.norm(W2, 2)
    return float(L * np.linalg.norm(W3 * net.y_std[:, None], 2))
