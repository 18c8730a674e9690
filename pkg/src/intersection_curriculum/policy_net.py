"""Two small tanh MLPs (actor and critic) with hand-written backprop and Adam.

All parameters live in one flat float64 vector; the layer arrays are views
into it, so optimizers and gradient checks can work on the flat vector.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

N_ACTIONS = 5
ACTOR_LAYERS = ("actor_w1", "actor_b1", "actor_w2", "actor_b2")
CRITIC_LAYERS = ("critic_w1", "critic_b1", "critic_w2", "critic_b2")
CHECKPOINT_MAGIC = b"ACNET\x00v1"


def layer_shapes(n_in: int, actor_hidden: int = 128, critic_hidden: int = 64,
                 n_actions: int = N_ACTIONS) -> Dict[str, Tuple[int, int]]:
    # biases are stored as 1 x n rows so every tensor has two dims on disk
    return {
        "actor_w1": (n_in, actor_hidden), "actor_b1": (1, actor_hidden),
        "actor_w2": (actor_hidden, n_actions), "actor_b2": (1, n_actions),
        "critic_w1": (n_in, critic_hidden), "critic_b1": (1, critic_hidden),
        "critic_w2": (critic_hidden, 1), "critic_b2": (1, 1),
    }


def parameter_count(n_in: int, actor_hidden: int = 128, critic_hidden: int = 64,
                    n_actions: int = N_ACTIONS) -> int:
    return ((n_in + 1) * actor_hidden + (actor_hidden + 1) * n_actions
            + (n_in + 1) * critic_hidden + critic_hidden + 1)


class ActorCriticParams:
    """Flat parameter vector with named layer views.

    >>> p = ActorCriticParams(18)
    >>> p.flat.size == parameter_count(18)
    True
    """

    def __init__(self, n_in: int, actor_hidden: int = 128, critic_hidden: int = 64,
                 n_actions: int = N_ACTIONS, flat: Optional[np.ndarray] = None):
        self.n_in = n_in
        self.actor_hidden = actor_hidden
        self.critic_hidden = critic_hidden
        self.n_actions = n_actions
        self.shapes = layer_shapes(n_in, actor_hidden, critic_hidden, n_actions)
        self.offsets: Dict[str, Tuple[int, int]] = {}
        o = 0
        for name, (r, c) in self.shapes.items():
            self.offsets[name] = (o, o + r * c)
            o += r * c
        self.flat = np.zeros(o) if flat is None else np.asarray(flat, dtype=float)
        if self.flat.shape != (o,):
            raise ValueError(f"expected {o} parameters, got {self.flat.shape}")
        self.actor_slice = slice(self.offsets["actor_w1"][0], self.offsets["actor_b2"][1])
        self.critic_slice = slice(self.offsets["critic_w1"][0], self.offsets["critic_b2"][1])

    def __getitem__(self, name: str) -> np.ndarray:
        a, b = self.offsets[name]
        return self.flat[a:b].reshape(self.shapes[name])

    def copy(self) -> "ActorCriticParams":
        return ActorCriticParams(self.n_in, self.actor_hidden, self.critic_hidden,
                                 self.n_actions, self.flat.copy())

    @classmethod
    def initialize(cls, n_in: int, rng: np.random.Generator, actor_hidden: int = 128,
                   critic_hidden: int = 64, n_actions: int = N_ACTIONS,
                   ) -> "ActorCriticParams":
        """Orthogonal init; the actor's output layer is scaled by 0.01."""
        p = cls(n_in, actor_hidden, critic_hidden, n_actions)
        gains = {"actor_w1": np.sqrt(2.0), "actor_w2": 0.01,
                 "critic_w1": np.sqrt(2.0), "critic_w2": 1.0}
        for name, gain in gains.items():
            p[name][...] = gain * _orthogonal(p.shapes[name], rng)
        return p


def _orthogonal(shape, rng):
    r, c = shape
    a = rng.standard_normal((max(r, c), min(r, c)))
    q, rr = np.linalg.qr(a)
    q = q * np.sign(np.diag(rr))
    return q if r >= c else q.T


class ActorCache(NamedTuple):
    x: np.ndarray
    h: np.ndarray
    logits: np.ndarray


class CriticCache(NamedTuple):
    x: np.ndarray
    h: np.ndarray
    values: np.ndarray


def _as_batch(obs_flat: np.ndarray) -> np.ndarray:
    x = np.asarray(obs_flat, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def actor_pass(params: ActorCriticParams, obs_flat: np.ndarray) -> ActorCache:
    x = _as_batch(obs_flat)
    h = np.tanh(x @ params["actor_w1"] + params["actor_b1"])
    return ActorCache(x, h, h @ params["actor_w2"] + params["actor_b2"])


def critic_pass(params: ActorCriticParams, obs_flat: np.ndarray) -> CriticCache:
    x = _as_batch(obs_flat)
    h = np.tanh(x @ params["critic_w1"] + params["critic_b1"])
    return CriticCache(x, h, (h @ params["critic_w2"] + params["critic_b2"])[:, 0])


def actor_forward(params: ActorCriticParams, obs_flat: np.ndarray) -> np.ndarray:
    """Action logits, shape ``(5,)`` for one input or ``(n, 5)`` for a batch."""
    logits = actor_pass(params, obs_flat).logits
    return logits[0] if np.ndim(obs_flat) == 1 else logits


def critic_forward(params: ActorCriticParams, obs_flat: np.ndarray):
    values = critic_pass(params, obs_flat).values
    return float(values[0]) if np.ndim(obs_flat) == 1 else values


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def log_prob(logits: np.ndarray, action) -> np.ndarray:
    lp = log_softmax(np.asarray(logits, dtype=float))
    if lp.ndim == 1:
        return float(lp[action])
    return lp[np.arange(lp.shape[0]), action]


def categorical_sample(logits: np.ndarray, rng: np.random.Generator) -> Tuple[int, float]:
    """Draw one action; returns ``(action, log_prob)``."""
    lp = log_softmax(np.asarray(logits, dtype=float))
    c = np.cumsum(np.exp(lp))
    a = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    a = min(a, lp.size - 1)
    return a, float(lp[a])


def greedy_action(logits: np.ndarray) -> int:
    """Argmax; ties go to the lowest index."""
    return int(np.argmax(logits))


@dataclass
class LossGrads:
    """Gradients of a scalar loss w.r.t. network outputs (and optionally params)."""
    dlogits: Optional[np.ndarray] = None
    dvalues: Optional[np.ndarray] = None
    dparams: Optional[np.ndarray] = None


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


LossFn = Callable[[np.ndarray, np.ndarray, ActorCriticParams, Batch], Tuple[float, LossGrads]]


def backward(loss_fn: LossFn, params: ActorCriticParams, batch: Batch,
             need_actor: bool = True, need_critic: bool = True) -> Tuple[float, np.ndarray]:
    """Value and exact gradient (flat, aligned with ``params.flat``) of ``loss_fn``.

    ``loss_fn(logits, values, params, batch)`` returns the scalar loss and the
    gradients w.r.t. its inputs; this routine chains them through both
    networks.
    """
    obs = batch.obs
    ac = actor_pass(params, obs) if need_actor else None
    cc = critic_pass(params, obs) if need_critic else None
    loss, g = loss_fn(ac.logits if ac else None, cc.values if cc else None, params, batch)
    grad = np.zeros_like(params.flat)
    view = ActorCriticParams(params.n_in, params.actor_hidden, params.critic_hidden,
                             params.n_actions, grad)
    if g.dlogits is not None:
        dz = g.dlogits
        view["actor_w2"][...] = ac.h.T @ dz
        view["actor_b2"][...] = dz.sum(axis=0)
        da = (dz @ params["actor_w2"].T) * (1.0 - ac.h ** 2)
        view["actor_w1"][...] = ac.x.T @ da
        view["actor_b1"][...] = da.sum(axis=0)
    if g.dvalues is not None:
        dv = g.dvalues[:, None]
        view["critic_w2"][...] = cc.h.T @ dv
        view["critic_b2"][...] = dv.sum(axis=0)
        da = (dv @ params["critic_w2"].T) * (1.0 - cc.h ** 2)
        view["critic_w1"][...] = cc.x.T @ da
        view["critic_b1"][...] = da.sum(axis=0)
    if g.dparams is not None:
        grad += g.dparams
    return float(loss), grad


@dataclass
class AdamState:
    lr: float
    size: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState) -> None:
    """Bias-corrected Adam update of ``theta`` in place."""
    if theta.shape != grad.shape or grad.shape != state.m.shape:
        raise ValueError("shape mismatch between parameters, gradient and moments")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def encode_observation(obs: np.ndarray, pos_scale: float, speed_scale: float) -> np.ndarray:
    """Scale an observation matrix (or a stack of them) and flatten row-major."""
    obs = np.asarray(obs, dtype=float)
    scale = np.array([pos_scale, pos_scale, speed_scale, speed_scale, 1.0, 1.0])
    out = obs / scale
    return out.reshape(-1) if obs.ndim == 2 else out.reshape(obs.shape[0], -1)


# --- checkpoints -----------------------------------------------------------

def _write_tensors(path: Path, tensors: List[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            fh.write(struct.pack("<II", *t.shape))
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def _read_tensors(path: Path) -> List[np.ndarray]:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a parameter checkpoint")
    o = len(CHECKPOINT_MAGIC)
    (n,) = struct.unpack_from("<I", data, o)
    o += 4
    shapes = []
    for _ in range(n):
        shapes.append(struct.unpack_from("<II", data, o))
        o += 8
    out = []
    for r, c in shapes:
        k = r * c * 8
        if o + k > len(data):
            raise ValueError(f"{path}: truncated checkpoint")
        out.append(np.frombuffer(data, dtype="<f8", count=r * c, offset=o).reshape(r, c).copy())
        o += k
    return out


def save_checkpoint(path, params: ActorCriticParams, metadata: Optional[dict] = None) -> None:
    """Write ``path`` (binary tensors) and ``path.meta.json`` (sidecar)."""
    path = Path(path)
    _write_tensors(path, [params[name] for name in params.shapes])
    meta = {"n_in": params.n_in, "actor_hidden": params.actor_hidden,
            "critic_hidden": params.critic_hidden, "n_actions": params.n_actions,
            "layers": list(params.shapes)}
    meta.update(metadata or {})
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_checkpoint(path) -> Tuple[ActorCriticParams, dict]:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    tensors = _read_tensors(path)
    params = ActorCriticParams(meta["n_in"], meta["actor_hidden"], meta["critic_hidden"],
                               meta["n_actions"])
    if len(tensors) != len(params.shapes):
        raise ValueError(f"{path}: expected {len(params.shapes)} tensors, got {len(tensors)}")
    for name, t in zip(params.shapes, tensors):
        if t.shape != params.shapes[name]:
            raise ValueError(f"{path}: layer {name} has shape {t.shape}")
        params[name][...] = t
    return params, meta


def save_moments(path, adam_states: Dict[str, AdamState]) -> None:
    tensors = []
    for st in adam_states.values():
        tensors += [st.m[None, :], st.v[None, :]]
    _write_tensors(Path(path), tensors)


def load_moments(path, adam_states: Dict[str, AdamState]) -> None:
    tensors = _read_tensors(Path(path))
    for k, st in enumerate(adam_states.values()):
        st.m[...] = tensors[2 * k][0]
        st.v[...] = tensors[2 * k + 1][0]
