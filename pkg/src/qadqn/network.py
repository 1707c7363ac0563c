"""The hybrid Q-network: LSTM -> pre-net -> quantum attention -> projection -> quantum post-net.

Parameters live in a flat ``{name: ndarray}`` mapping; names are grouped by
their prefix (``lstm``, ``prenet``, ``head0`` ..., ``proj``, ``postnet``,
``out``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import autodiff as ad
from .attention import qmsa
from .quantum import QuantumLayer, entangling_circuit

MODEL_FORMAT = "qadqn-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    window: int = 24
    features: int = 4
    hidden: int = 64
    prenet: tuple[int, ...] = (32, 8)
    qubits: int = 4
    heads: int = 2
    layers: int = 2
    actions: int = 3
    affine_head: bool = False

    def __post_init__(self):
        object.__setattr__(self, "prenet", tuple(int(d) for d in self.prenet))
        if self.actions > self.qubits:
            raise ValueError("cannot read more actions than post-net qubits")
        if min(self.window, self.features, self.hidden, self.qubits, self.heads, self.layers) < 1:
            raise ValueError("network dimensions must be positive")

    @property
    def spec(self):
        return entangling_circuit(self.qubits, self.layers)

    @property
    def prenet_dims(self) -> tuple[int, ...]:
        return (self.hidden, *self.prenet, self.qubits)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prenet"] = list(self.prenet)
        return d


@dataclass
class NetworkParams:
    config: NetConfig
    arrays: dict[str, np.ndarray]
    seed: int | None = None
    version: int = MODEL_VERSION

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def names(self) -> list[str]:
        return list(self.arrays)

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for name in self.arrays:
            out.setdefault(name.split(".")[0], []).append(name)
        return out

    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def clone(self) -> "NetworkParams":
        return clone_params(self)


def init_params(config: NetConfig = NetConfig(), seed: int = 0) -> NetworkParams:
    """Classical weights ~ U(+-1/sqrt(fan_in)); circuit angles ~ U(-pi, pi)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    arrays: dict[str, np.ndarray] = {}

    def uni(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, shape)

    f, H = config.features, config.hidden
    arrays["lstm.w_x"] = uni((f, 4 * H), f + H)
    arrays["lstm.w_h"] = uni((H, 4 * H), f + H)
    arrays["lstm.b"] = uni((4 * H,), f + H)
    dims = config.prenet_dims
    for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        arrays[f"prenet.w{k}"] = uni((a, b), a)
        arrays[f"prenet.b{k}"] = uni((b,), a)
    p = config.spec.num_params
    for h in range(config.heads):
        for part in ("k", "q", "v"):
            arrays[f"head{h}.theta_{part}"] = rng.uniform(-np.pi, np.pi, p)
    width = config.heads * config.qubits
    arrays["proj.w"] = uni((width, config.qubits), width)
    arrays["proj.b"] = uni((config.qubits,), width)
    arrays["postnet.theta"] = rng.uniform(-np.pi, np.pi, p)
    if config.affine_head:
        arrays["out.scale"] = np.ones(config.actions)
        arrays["out.bias"] = np.zeros(config.actions)
    return NetworkParams(config, arrays, seed)


def zero_params(config: NetConfig = NetConfig()) -> NetworkParams:
    params = init_params(config, 0)
    return NetworkParams(config, {k: np.zeros_like(v) for k, v in params.arrays.items()}, None)


def clone_params(params: NetworkParams) -> NetworkParams:
    return NetworkParams(params.config, {k: v.copy() for k, v in params.arrays.items()},
                         params.seed, params.version)


@dataclass
class ForwardCache:
    tape: ad.Tape
    leaves: dict[str, ad.Node]
    q: ad.Node
    single: bool


def _batch(config: NetConfig, windows) -> tuple[np.ndarray, bool]:
    x = np.asarray(getattr(windows, "matrix", windows), dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (config.window, config.features):
        raise ValueError(f"expected window shape ({config.window}, {config.features}), got {x.shape[1:]}")
    return x, single


def _network(config: NetConfig, p: dict, x: np.ndarray):
    """Shared forward body; ``p`` maps names to arrays or tape nodes."""
    B = x.shape[0]
    seq = x[:, ::-1, :]                      # rows arrive newest-first
    h = np.zeros((B, config.hidden))
    c = np.zeros((B, config.hidden))
    hs = []
    for s in range(config.window):
        h, c = ad.lstm_cell(seq[:, s, :], h, c, p["lstm.w_x"], p["lstm.w_h"], p["lstm.b"])
        hs.append(h)
    z = ad.stack(hs, axis=1)                 # (B, n, hidden)
    for k in range(len(config.prenet_dims) - 1):
        z = ad.elu(ad.linear(z, p[f"prenet.w{k}"], p[f"prenet.b{k}"]))
    thetas = []
    for hd in range(config.heads):
        thetas += [p[f"head{hd}.theta_k"], p[f"head{hd}.theta_q"], p[f"head{hd}.theta_v"]]
    spec = config.spec
    attended = qmsa(z, thetas, spec)         # (B, n, heads * qubits)
    latest = ad.getitem(attended, (slice(None), -1))
    angles = ad.linear(latest, p["proj.w"], p["proj.b"])
    post = QuantumLayer(spec, (tuple(range(config.actions)),))
    q = post(angles, [p["postnet.theta"]])
    if config.affine_head:
        q = ad.add(ad.mul(q, p["out.scale"]), p["out.bias"])
    return q


def q_values(params: NetworkParams, windows) -> np.ndarray:
    """Gradient-free forward; (actions,) for one window or (B, actions) for a batch."""
    x, single = _batch(params.config, windows)
    q = _network(params.config, params.arrays, x)
    return q[0] if single else q


def forward(params: NetworkParams, windows) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass recording a tape for :func:`backward`."""
    x, single = _batch(params.config, windows)
    tape = ad.Tape()
    leaves = {k: tape.leaf(v, k) for k, v in params.arrays.items()}
    q = _network(params.config, leaves, x)
    out = q.value[0] if single else q.value
    return out.copy(), ForwardCache(tape, leaves, q, single)


def backward(cache: ForwardCache | None, dq) -> dict[str, np.ndarray]:
    """Gradient of a scalar loss w.r.t. every parameter given dLoss/dQ."""
    if cache is None:
        raise ValueError("backward needs the cache returned by forward()")
    dq = np.asarray(dq, dtype=float)
    if cache.single:
        dq = dq[None]
    grads = cache.tape.backward(cache.q, dq)
    return {name: grads[node] for name, node in cache.leaves.items()}


# -- persistence ------------------------------------------------------------

def params_to_dict(params: NetworkParams, extra: dict[str, Any] | None = None) -> dict:
    grouped: dict[str, dict] = {}
    for name, arr in params.arrays.items():
        group, _, key = name.partition(".")
        grouped.setdefault(group, {})[key] = {
            "shape": list(arr.shape),
            "data": [float(v) for v in arr.ravel()],
        }
    doc = {
        "format": MODEL_FORMAT,
        "version": params.version,
        "config": params.config.to_dict(),
        "seed": params.seed,
        "params": grouped,
    }
    if extra:
        doc["run_config"] = extra
    return doc


def params_from_dict(doc: dict) -> NetworkParams:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    config = NetConfig(**doc["config"])
    arrays = {}
    for group, entries in doc["params"].items():
        for key, entry in entries.items():
            arrays[f"{group}.{key}"] = np.array(entry["data"], dtype=float).reshape(entry["shape"])
    expected = init_params(config, 0).arrays
    if set(arrays) != set(expected) or any(arrays[k].shape != expected[k].shape for k in expected):
        raise ValueError("parameter arrays do not match the stored config")
    arrays = {k: arrays[k] for k in expected}
    return NetworkParams(config, arrays, doc.get("seed"), doc["version"])


def save_model(params: NetworkParams, path: str | Path, extra: dict[str, Any] | None = None) -> None:
    text = json.dumps(params_to_dict(params, extra), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[NetworkParams, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return params_from_dict(doc), doc.get("run_config", {})
