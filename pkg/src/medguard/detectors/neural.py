"""Dense autoencoder and variational autoencoder with hand-written backprop.

Both networks are ``d -> hidden -> latent -> hidden -> d`` with tanh hidden
layers and linear latent/output layers.  The VAE encoder has two linear heads
(mean and log-variance).  Parameters live in one flat float64 vector so the
optimizer, the rollback logic and the gradient check all work on plain arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..rng import Rng
from .base import DetectorError

AE = "AUTOENCODER"
VAE = "VAE"


def kl_divergence(mu, logvar) -> np.ndarray:
    """Per-row KL(N(mu, sigma^2) || N(0, 1)) summed over latent dimensions."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    return -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar), axis=1)


def layer_shapes(kind: str, d: int, hidden: int, latent: int) -> list:
    enc = [("W1", (d, hidden)), ("b1", (hidden,))]
    if kind == VAE:
        enc += [("Wmu", (hidden, latent)), ("bmu", (latent,)), ("Wlv", (hidden, latent)), ("blv", (latent,))]
    else:
        enc += [("W2", (hidden, latent)), ("b2", (latent,))]
    dec = [("W3", (latent, hidden)), ("b3", (hidden,)), ("W4", (hidden, d)), ("b4", (d,))]
    return enc + dec


@dataclass
class NeuralNetModel:
    kind: str
    n_inputs: int
    hidden_dim: int
    latent_dim: int
    theta: np.ndarray
    loss_history: list = field(default_factory=list)
    learning_rate: float = 0.01     # final rate after any halving

    def __post_init__(self):
        if self.kind not in (AE, VAE):
            raise DetectorError(f"unknown network kind {self.kind!r}")
        if self.theta.size != n_params(self.kind, self.n_inputs, self.hidden_dim, self.latent_dim):
            raise DetectorError("parameter vector has the wrong length")

    def unpack(self, theta=None) -> dict:
        return unpack(self.kind, self.n_inputs, self.hidden_dim, self.latent_dim,
                      self.theta if theta is None else theta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_inputs": self.n_inputs, "hidden_dim": self.hidden_dim,
                "latent_dim": self.latent_dim, "theta": self.theta.tolist(),
                "loss_history": list(self.loss_history), "learning_rate": self.learning_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralNetModel":
        return cls(d["kind"], int(d["n_inputs"]), int(d["hidden_dim"]), int(d["latent_dim"]),
                   np.array(d["theta"], dtype=np.float64), list(d.get("loss_history", [])),
                   float(d.get("learning_rate", 0.01)))


def n_params(kind, d, hidden, latent) -> int:
    return sum(math.prod(s) for _, s in layer_shapes(kind, d, hidden, latent))


def unpack(kind, d, hidden, latent, theta) -> dict:
    """Views into ``theta`` keyed by layer name (writes go through to theta)."""
    out, pos = {}, 0
    for name, shape in layer_shapes(kind, d, hidden, latent):
        size = math.prod(shape)
        out[name] = theta[pos:pos + size].reshape(shape)
        pos += size
    return out


def init_params(kind, d, hidden, latent, rng: Rng) -> np.ndarray:
    """Weights uniform in [-0.05, 0.05], biases zero."""
    theta = np.zeros(n_params(kind, d, hidden, latent))
    p = unpack(kind, d, hidden, latent, theta)
    for name, arr in p.items():
        if name.startswith("W"):
            arr[...] = rng.uniform(arr.size, -0.05, 0.05).reshape(arr.shape)
    return theta


def _decode(p, z):
    a3 = np.tanh(z @ p["W3"] + p["b3"])
    return a3, a3 @ p["W4"] + p["b4"]


def forward(kind, p, X, eps=None) -> dict:
    a1 = np.tanh(X @ p["W1"] + p["b1"])
    cache = {"a1": a1}
    if kind == VAE:
        mu = a1 @ p["Wmu"] + p["bmu"]
        lv = a1 @ p["Wlv"] + p["blv"]
        sigma = np.exp(0.5 * lv)
        z = mu if eps is None else mu + sigma * eps
        cache.update(mu=mu, lv=lv, sigma=sigma)
    else:
        z = a1 @ p["W2"] + p["b2"]
    a3, out = _decode(p, z)
    cache.update(z=z, a3=a3, out=out)
    return cache


def loss_and_grads(model_or_kind, theta, X, eps=None, dims=None):
    """Batch loss and its gradient with respect to ``theta``.

    AE loss is the mean squared reconstruction error.  The VAE weighs the
    squared error per row (MSE times the input width, so reconstruction is not
    swamped by the KL term as the input grows) and adds the mean per-row KL;
    ``eps`` holds the reparameterization noise, one row per sample.
    """
    if isinstance(model_or_kind, NeuralNetModel):
        m = model_or_kind
        kind, dims = m.kind, (m.n_inputs, m.hidden_dim, m.latent_dim)
    else:
        kind = model_or_kind
    d, hidden, latent = dims
    p = unpack(kind, d, hidden, latent, theta)
    n = X.shape[0]
    c = forward(kind, p, X, eps)
    diff = c["out"] - X
    recon_w = float(d) if kind == VAE else 1.0
    loss = recon_w * float(np.mean(diff**2))
    grad = np.zeros_like(theta)
    g = unpack(kind, d, hidden, latent, grad)

    d_out = 2.0 * recon_w * diff / (n * d)
    g["W4"][...] = c["a3"].T @ d_out
    g["b4"][...] = d_out.sum(axis=0)
    d_a3 = d_out @ p["W4"].T * (1.0 - c["a3"] ** 2)
    g["W3"][...] = c["z"].T @ d_a3
    g["b3"][...] = d_a3.sum(axis=0)
    d_z = d_a3 @ p["W3"].T
    if kind == VAE:
        mu, lv, sigma = c["mu"], c["lv"], c["sigma"]
        loss += float(np.mean(kl_divergence(mu, lv)))
        d_mu = d_z + mu / n
        d_lv = 0.5 * (np.exp(lv) - 1.0) / n
        if eps is not None:
            d_lv = d_lv + d_z * eps * 0.5 * sigma
        g["Wmu"][...] = c["a1"].T @ d_mu
        g["bmu"][...] = d_mu.sum(axis=0)
        g["Wlv"][...] = c["a1"].T @ d_lv
        g["blv"][...] = d_lv.sum(axis=0)
        d_a1 = d_mu @ p["Wmu"].T + d_lv @ p["Wlv"].T
    else:
        g["W2"][...] = c["a1"].T @ d_z
        g["b2"][...] = d_z.sum(axis=0)
        d_a1 = d_z @ p["W2"].T
    d_a1 = d_a1 * (1.0 - c["a1"] ** 2)
    g["W1"][...] = X.T @ d_a1
    g["b1"][...] = d_a1.sum(axis=0)
    return loss, grad


class _Adam:
    def __init__(self, size, b1=0.9, b2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.b1, self.b2, self.eps = b1, b2, eps

    def state(self):
        return self.m.copy(), self.v.copy(), self.t

    def restore(self, s):
        self.m, self.v, self.t = s[0].copy(), s[1].copy(), s[2]

    def step(self, theta, grad, lr):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mh = self.m / (1 - self.b1**self.t)
        vh = self.v / (1 - self.b2**self.t)
        theta -= lr * mh / (np.sqrt(vh) + self.eps)


def neural_fit(X, kind: str = AE, latent_dim: int = 2, hidden_dim: int = 16, epochs: int = 100,
               batch_size: int = 32, learning_rate: float = 0.01, seed: int = 0) -> NeuralNetModel:
    """Mini-batch training with Adam.

    After each epoch the loss is measured on the full training set (with fixed
    noise for the VAE).  An epoch that raises this loss is undone and the
    learning rate halved, so the recorded history never increases.  Training
    stops early once the rate has been halved 30 times, since later epochs
    can no longer move the weights meaningfully.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise DetectorError("no training rows")
    root = Rng(seed).child(0xAE)
    theta = init_params(kind, d, hidden_dim, latent_dim, root.child(0))
    model = NeuralNetModel(kind, d, hidden_dim, latent_dim, theta, [], learning_rate)
    dims = (d, hidden_dim, latent_dim)
    eval_eps = root.child(1).normal(n * latent_dim).reshape(n, latent_dim) if kind == VAE else None

    def full_loss(th):
        return loss_and_grads(kind, th, X, eval_eps, dims)[0]

    best = full_loss(theta)
    model.loss_history.append(best)
    opt = _Adam(theta.size)
    lr = learning_rate
    for epoch in range(int(epochs)):
        if lr < learning_rate * 2.0**-30:
            break
        saved_theta, saved_opt = theta.copy(), opt.state()
        erng = root.child(2 + epoch)
        order = erng.permutation(n)
        noise = erng.normal(n * latent_dim).reshape(n, latent_dim) if kind == VAE else None
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            _, grad = loss_and_grads(kind, theta, X[rows], None if noise is None else noise[start:start + rows.size], dims)
            opt.step(theta, grad, lr)
        loss = full_loss(theta)
        if not np.isfinite(loss) or not np.isfinite(theta).all():
            raise DetectorError(f"{kind} training diverged at epoch {epoch + 1} (loss {loss}); "
                                f"lower the learning rate below {lr:g}")
        if loss > best:
            theta[...] = saved_theta
            opt.restore(saved_opt)
            lr /= 2.0
        else:
            best = loss
        model.loss_history.append(best)
    model.learning_rate = lr
    return model


def reconstruction_error(model: NeuralNetModel, X) -> np.ndarray:
    """Per-row mean squared error; the VAE decodes from the latent mean."""
    X = np.asarray(X, dtype=np.float64)
    c = forward(model.kind, model.unpack(), X, None)
    return np.mean((c["out"] - X) ** 2, axis=1)
