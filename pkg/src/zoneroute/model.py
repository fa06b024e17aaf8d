"""Route policy: GATv2 encoder with edge attributes + GRU/pointer decoder.

The encoder stacks three single-head GATv2 layers over the complete digraph
(self-loops included with edge weight 0), with layer norm after every layer
and ELU + dropout between layers.  The decoder keeps a GRU state, updated
each step with the last selected node's embedding, and points at the next
unvisited node through a tanh attention head whose query/key branches are
two FC layers with a ReLU in between, layer-normalized before the tanh.
Training uses REINFORCE with a moving-average baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, DomainError
from .routegraph import N_FEATURES, ZONE_LABEL_BUCKETS, RouteGraph, tour_length

ZONE_EMBED_DIM = 16
CHECKPOINT_FORMAT = 1


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    dropout: float = 0.1

    @property
    def input_dim(self) -> int:
        return N_FEATURES + ZONE_EMBED_DIM


def _param_layout(cfg: ModelConfig):
    """Fixed (name, shape) serialization order for all learnable tensors."""
    d = cfg.hidden_dim
    layout = [("zone_embed", (ZONE_LABEL_BUCKETS, ZONE_EMBED_DIM))]
    d_in = cfg.input_dim
    for layer in (1, 2, 3):
        layout += [
            (f"gat{layer}.W_src", (d_in, d)),
            (f"gat{layer}.W_dst", (d_in, d)),
            (f"gat{layer}.W_edge", (1, d)),
            (f"gat{layer}.attn", (d, 1)),
            (f"gat{layer}.ln_gain", (1, d)),
            (f"gat{layer}.ln_bias", (1, d)),
        ]
        d_in = d
    for gate in ("z", "r", "h"):
        layout += [
            (f"gru.W_{gate}", (d, d)),
            (f"gru.U_{gate}", (d, d)),
            (f"gru.b_{gate}", (1, d)),
        ]
    layout += [
        ("ptr.FC1_q", (d, d)),
        ("ptr.FC2_q", (d, d)),
        ("ptr.FC1_k", (d, d)),
        ("ptr.FC2_k", (d, d)),
        ("ptr.ln_q_gain", (1, d)),
        ("ptr.ln_q_bias", (1, d)),
        ("ptr.ln_k_gain", (1, d)),
        ("ptr.ln_k_bias", (1, d)),
        ("ptr.v", (d, 1)),
        ("dec.W_init", (d, d)),
    ]
    return layout


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor] = field(repr=False, default=None)

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int) -> "ModelParams":
        rng = ad.make_rng(seed)
        tensors = {}
        for name, shape in _param_layout(cfg):
            if name.endswith("ln_gain") or name.endswith("_gain"):
                data = np.ones(shape)
            elif name.endswith("bias") or name.startswith("gru.b"):
                data = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[0])
                data = rng.uniform(-bound, bound, size=shape)
            tensors[name] = Tensor(data, requires_grad=True, name=name)
        return cls(config=cfg, tensors=tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self):
        return [name for name, _ in _param_layout(self.config)]

    def as_list(self):
        return [self.tensors[n] for n in self.names()]

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "config": {"hidden_dim": self.config.hidden_dim, "dropout": self.config.dropout},
            "params": [
                {"name": n, "shape": list(self.tensors[n].shape),
                 "values": self.tensors[n].data.reshape(-1).tolist()}
                for n in self.names()
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"unsupported checkpoint format in {path}")
        cfg = ModelConfig(hidden_dim=int(payload["config"]["hidden_dim"]),
                          dropout=float(payload["config"]["dropout"]))
        expected = _param_layout(cfg)
        entries = payload["params"]
        if [e["name"] for e in entries] != [n for n, _ in expected]:
            raise DataError(f"checkpoint {path}: unexpected parameter set or order")
        tensors = {}
        for entry, (name, shape) in zip(entries, expected):
            if tuple(entry["shape"]) != shape:
                raise DataError(f"checkpoint {path}: {name} has shape {entry['shape']}, expected {shape}")
            data = np.array(entry["values"], dtype=np.float64).reshape(shape)
            tensors[name] = Tensor(data, requires_grad=True, name=name)
        return cls(config=cfg, tensors=tensors)


# ---------------------------------------------------------------------------
# encoder

def gatv2_layer(H: Tensor, edge_w: np.ndarray, params: ModelParams, layer: int) -> Tensor:
    """Single-head GATv2 over the complete digraph with scalar edge attributes.

    Score for source j -> target i applies the attention vector after the
    LeakyReLU: a^T LeakyReLU(W_dst h_i + W_src h_j + edge_w[j, i] * W_edge).
    """
    n = H.shape[0]
    if edge_w.shape != (n, n):
        raise DomainError(f"edge_w shape {edge_w.shape} != ({n}, {n})")
    W_src = params[f"gat{layer}.W_src"]
    W_dst = params[f"gat{layer}.W_dst"]
    W_edge = params[f"gat{layer}.W_edge"]
    attn = params[f"gat{layer}.attn"]

    Hs = ad.matmul(H, W_src)
    Hd = ad.matmul(H, W_dst)

    idx_i = np.repeat(np.arange(n), n)
    idx_j = np.tile(np.arange(n), n)
    pre = ad.add(ad.add(ad.gather_rows(Hd, idx_i), ad.gather_rows(Hs, idx_j)),
                 ad.mul(Tensor(edge_w[idx_j, idx_i].reshape(-1, 1)), W_edge))
    scores = ad.reshape(ad.matmul(ad.leaky_relu(pre, 0.2), attn), (n, n))
    alpha = ad.exp(ad.masked_log_softmax(scores, np.ones((n, n), dtype=bool)))
    return ad.matmul(alpha, Hs)


def encode(g: RouteGraph, params: ModelParams, training: bool = False,
           rng: np.random.Generator | None = None) -> Tensor:
    """Node embeddings: [features || zone embedding] through the 3-layer stack."""
    X = ad.concat_cols(Tensor(g.features), ad.gather_rows(params["zone_embed"], g.zone_label_idx))
    H = X
    rate = params.config.dropout
    for layer in (1, 2, 3):
        H = gatv2_layer(H, g.edge_w, params, layer)
        H = ad.layer_norm(H, params[f"gat{layer}.ln_gain"], params[f"gat{layer}.ln_bias"])
        if layer < 3:
            H = ad.dropout(ad.elu(H), rate, rng, training)
    return H


# ---------------------------------------------------------------------------
# decoder

def gru_step(h: Tensor, x: Tensor, params: ModelParams) -> Tensor:
    z = ad.sigmoid(ad.add(ad.add(ad.matmul(x, params["gru.W_z"]), ad.matmul(h, params["gru.U_z"])),
                          params["gru.b_z"]))
    r = ad.sigmoid(ad.add(ad.add(ad.matmul(x, params["gru.W_r"]), ad.matmul(h, params["gru.U_r"])),
                          params["gru.b_r"]))
    h_cand = ad.tanh(ad.add(ad.add(ad.matmul(x, params["gru.W_h"]),
                                   ad.matmul(ad.mul(r, h), params["gru.U_h"])),
                            params["gru.b_h"]))
    one_minus_z = ad.add(ad.scale(z, -1.0), Tensor(np.ones(z.shape)))
    return ad.add(ad.mul(one_minus_z, h), ad.mul(z, h_cand))


def pointer_keys(E: Tensor, params: ModelParams) -> Tensor:
    return ad.layer_norm(ad.matmul(ad.relu(ad.matmul(E, params["ptr.FC1_k"])), params["ptr.FC2_k"]),
                         params["ptr.ln_k_gain"], params["ptr.ln_k_bias"])


def pointer_step(h: Tensor, E: Tensor, visited: np.ndarray, params: ModelParams,
                 keys: Tensor | None = None) -> Tensor:
    """Log-probabilities (1 x n) over unvisited nodes for the next step."""
    visited = np.asarray(visited, dtype=bool)
    if visited.all():
        raise DomainError("pointer_step: all nodes already visited")
    q = ad.layer_norm(ad.matmul(ad.relu(ad.matmul(h, params["ptr.FC1_q"])), params["ptr.FC2_q"]),
                      params["ptr.ln_q_gain"], params["ptr.ln_q_bias"])
    if keys is None:
        keys = pointer_keys(E, params)
    logits = ad.transpose(ad.matmul(ad.tanh(ad.add(keys, q)), params["ptr.v"]))
    return ad.masked_log_softmax(logits, ~visited.reshape(1, -1))


@dataclass
class DecodeResult:
    tour: list[int]
    log_prob: float
    length: float


def _init_state(E: Tensor, params: ModelParams) -> Tensor:
    return ad.tanh(ad.matmul(ad.tmean(E, axis=0), params["dec.W_init"]))


def _select_log_prob(logp: Tensor, j: int) -> Tensor:
    onehot = np.zeros(logp.shape)
    onehot[0, j] = 1.0
    return ad.tsum(ad.mul(logp, Tensor(onehot)))


def decode_tape(E: Tensor, start: int, params: ModelParams, greedy: bool,
                rng: np.random.Generator | None = None):
    """Run the pointer decoder; returns (tour, summed log-prob Tensor)."""
    n = E.shape[0]
    if not 0 <= start < n:
        raise DomainError(f"start index {start} out of range for {n} nodes")
    if not greedy and rng is None:
        raise DomainError("sampling decode requires an rng")
    h = _init_state(E, params)
    keys = pointer_keys(E, params)
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    tour = [start]
    terms = []
    last = start
    for _ in range(n - 1):
        h = gru_step(h, ad.gather_rows(E, [last]), params)
        logp = pointer_step(h, E, visited, params, keys=keys)
        if greedy:
            j = int(np.argmax(logp.data[0]))
        else:
            probs = np.exp(logp.data[0])
            probs = probs / probs.sum()
            j = int(rng.choice(n, p=probs))
        terms.append(_select_log_prob(logp, j))
        visited[j] = True
        tour.append(j)
        last = j
    if terms:
        total = terms[0]
        for t in terms[1:]:
            total = ad.add(total, t)
    else:
        total = Tensor(0.0)
    return tour, total


def decode(E: Tensor, start: int, travel: np.ndarray, params: ModelParams,
           greedy: bool = True, rng: np.random.Generator | None = None) -> DecodeResult:
    tour, logp = decode_tape(E, start, params, greedy, rng)
    return DecodeResult(tour=tour, log_prob=logp.item(),
                        length=tour_length(tour, travel))


def tour_log_prob(E: Tensor, tour, params: ModelParams) -> Tensor:
    """Log-probability Tensor of a fixed tour under the current policy."""
    n = E.shape[0]
    if sorted(tour) != list(range(n)):
        raise DomainError("tour is not a permutation of the node indices")
    h = _init_state(E, params)
    keys = pointer_keys(E, params)
    visited = np.zeros(n, dtype=bool)
    visited[tour[0]] = True
    terms = []
    last = tour[0]
    for j in tour[1:]:
        h = gru_step(h, ad.gather_rows(E, [last]), params)
        logp = pointer_step(h, E, visited, params, keys=keys)
        terms.append(_select_log_prob(logp, j))
        visited[j] = True
        last = j
    total = Tensor(0.0)
    for t in terms:
        total = ad.add(total, t)
    return total


# ---------------------------------------------------------------------------
# loss

def reinforce_loss(log_probs, lengths, baseline: float) -> Tensor:
    """Mean over the batch of (length - baseline) * log_prob.

    The advantage is a constant with respect to gradients; only the
    log-probabilities carry derivative information.
    """
    if len(log_probs) == 0:
        raise DomainError("reinforce_loss: empty batch")
    if len(log_probs) != len(lengths):
        raise DomainError("reinforce_loss: batch size mismatch")
    if not all(np.isfinite(lengths)):
        raise DomainError("reinforce_loss: non-finite tour length")
    total = None
    for lp, length in zip(log_probs, lengths):
        term = ad.scale(lp, float(length) - baseline)
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, 1.0 / len(log_probs))
