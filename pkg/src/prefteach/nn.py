"""Minimal numpy neural-net kit: GRU / BiGRU with exact backward passes,
dense layers, losses, and Adam.  Everything is float64 and deterministic;
the finite-difference test suite checks every analytic gradient here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Params = dict[str, np.ndarray]
Grads = dict[str, np.ndarray]


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x)
    e = np.exp(z)
    return e / e.sum()


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    scale = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-scale, scale, size=(fan_out, fan_in))


def init_gru(params: Params, rng: np.random.Generator, prefix: str, d_in: int, d_hidden: int) -> None:
    for gate in ("z", "r", "h"):
        params[f"{prefix}.W{gate}"] = glorot(rng, d_hidden, d_in)
        params[f"{prefix}.U{gate}"] = glorot(rng, d_hidden, d_hidden)
        params[f"{prefix}.b{gate}"] = np.zeros(d_hidden)


@dataclass
class GruCache:
    x: np.ndarray  # (T, d_in)
    h: np.ndarray  # (T + 1, H), h[0] = 0
    z: np.ndarray
    r: np.ndarray
    hbar: np.ndarray


def gru_forward(params: Params, prefix: str, x: np.ndarray) -> tuple[np.ndarray, GruCache]:
    wz, uz, bz = params[f"{prefix}.Wz"], params[f"{prefix}.Uz"], params[f"{prefix}.bz"]
    wr, ur, br = params[f"{prefix}.Wr"], params[f"{prefix}.Ur"], params[f"{prefix}.br"]
    wh, uh, bh = params[f"{prefix}.Wh"], params[f"{prefix}.Uh"], params[f"{prefix}.bh"]
    t_len = x.shape[0]
    hdim = wz.shape[0]
    h = np.zeros((t_len + 1, hdim))
    z = np.zeros((t_len, hdim))
    r = np.zeros((t_len, hdim))
    hbar = np.zeros((t_len, hdim))
    for t in range(t_len):
        z[t] = sigmoid(wz @ x[t] + uz @ h[t] + bz)
        r[t] = sigmoid(wr @ x[t] + ur @ h[t] + br)
        hbar[t] = np.tanh(wh @ x[t] + uh @ (r[t] * h[t]) + bh)
        h[t + 1] = (1.0 - z[t]) * h[t] + z[t] * hbar[t]
    return h[1:], GruCache(x=x, h=h, z=z, r=r, hbar=hbar)


def gru_backward(params: Params, prefix: str, cache: GruCache, dh_out: np.ndarray, grads: Grads) -> np.ndarray:
    """dh_out: (T, H) gradient on each output state; returns dx (T, d_in)."""
    wz, uz = params[f"{prefix}.Wz"], params[f"{prefix}.Uz"]
    wr, ur = params[f"{prefix}.Wr"], params[f"{prefix}.Ur"]
    wh, uh = params[f"{prefix}.Wh"], params[f"{prefix}.Uh"]
    t_len, _ = dh_out.shape
    dx = np.zeros_like(cache.x)
    dh_next = np.zeros(wz.shape[0])

    def acc(name: str, val: np.ndarray) -> None:
        if name in grads:
            grads[name] += val
        else:
            grads[name] = val.copy()

    for t in range(t_len - 1, -1, -1):
        dh = dh_out[t] + dh_next
        h_prev = cache.h[t]
        z, r, hbar = cache.z[t], cache.r[t], cache.hbar[t]

        dz = dh * (hbar - h_prev)
        dhbar = dh * z
        dh_prev = dh * (1.0 - z)

        da_h = dhbar * (1.0 - hbar * hbar)
        acc(f"{prefix}.Wh", np.outer(da_h, cache.x[t]))
        acc(f"{prefix}.Uh", np.outer(da_h, r * h_prev))
        acc(f"{prefix}.bh", da_h)
        d_rh = uh.T @ da_h
        dr = d_rh * h_prev
        dh_prev = dh_prev + d_rh * r

        da_z = dz * z * (1.0 - z)
        acc(f"{prefix}.Wz", np.outer(da_z, cache.x[t]))
        acc(f"{prefix}.Uz", np.outer(da_z, h_prev))
        acc(f"{prefix}.bz", da_z)
        dh_prev = dh_prev + uz.T @ da_z

        da_r = dr * r * (1.0 - r)
        acc(f"{prefix}.Wr", np.outer(da_r, cache.x[t]))
        acc(f"{prefix}.Ur", np.outer(da_r, h_prev))
        acc(f"{prefix}.br", da_r)
        dh_prev = dh_prev + ur.T @ da_r

        dx[t] = wz.T @ da_z + wr.T @ da_r + wh.T @ da_h
        dh_next = dh_prev
    return dx


@dataclass
class BiGruCache:
    fw: GruCache
    bw: GruCache


def bigru_forward(params: Params, prefix: str, x: np.ndarray) -> tuple[np.ndarray, BiGruCache]:
    """Concatenated forward/backward states: (T, 2H)."""
    h_fw, c_fw = gru_forward(params, f"{prefix}.fw", x)
    h_bw_rev, c_bw = gru_forward(params, f"{prefix}.bw", x[::-1].copy())
    h_bw = h_bw_rev[::-1]
    return np.concatenate([h_fw, h_bw], axis=1), BiGruCache(fw=c_fw, bw=c_bw)


def bigru_backward(params: Params, prefix: str, cache: BiGruCache, dh: np.ndarray, grads: Grads) -> np.ndarray:
    hdim = dh.shape[1] // 2
    dx_fw = gru_backward(params, f"{prefix}.fw", cache.fw, dh[:, :hdim], grads)
    dx_bw_rev = gru_backward(params, f"{prefix}.bw", cache.bw, dh[::-1, hdim:].copy(), grads)
    return dx_fw + dx_bw_rev[::-1]


def accumulate(grads: Grads, name: str, val: np.ndarray) -> None:
    if name in grads:
        grads[name] += val
    else:
        grads[name] = np.array(val, copy=True)


@dataclass
class Adam:
    """Adaptive per-parameter step size; state keyed like the param dict."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def step(self, params: Params, grads: Grads) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def flat_coords(params: Params) -> list[tuple[str, tuple[int, ...]]]:
    """Every (name, index) coordinate, in deterministic order."""
    out = []
    for name in sorted(params):
        arr = params[name]
        for idx in np.ndindex(arr.shape):
            out.append((name, idx))
    return out


def finite_difference(
    loss_fn: Callable[[], float],
    params: Params,
    name: str,
    idx: tuple[int, ...],
    h: float = 1e-4,
) -> float:
    """Central finite difference of loss_fn wrt params[name][idx]."""
    orig = params[name][idx]
    params[name][idx] = orig + h
    up = loss_fn()
    params[name][idx] = orig - h
    down = loss_fn()
    params[name][idx] = orig
    return (up - down) / (2.0 * h)
