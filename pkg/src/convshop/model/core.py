"""The neural matcher: encoders, multi-head glimpse attention product
scoring, intent head, autoregressive state decoder, joint loss, and the
hand-derived backward pass.

Everything is plain numpy in double precision so the analytic gradients can
be verified coordinate-by-coordinate against central finite differences.
The "encoder" is deliberately small: mean-pooled trainable embeddings
followed by one tanh feedforward layer per role, behind functions that a
deeper encoder could replace. The state-tracking and profile encoders share
one text embedding table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..acts import USER_INTENTS
from .vocab import BOS, EOS, Vocab

MODES = ("hybrid", "text", "attr")


@dataclass
class ModelConfig:
    d: int = 32
    n_heads: int = 4
    d_head: int = 16
    text_vocab: int = 0
    attr_vocab: int = 0
    state_vocab: int = 0
    intents: tuple = USER_INTENTS
    mode: str = "hybrid"  # which halves of the product vector are live
    max_state_len: int = 40

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(self).items()}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["intents"] = tuple(data["intents"])
        return cls(**data)


ENCODER_ROLES = {
    "ctx": "E_text",
    "state": "E_text",
    "prof": "E_text",
    "attr": "E_attr",
}


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform(-0.1, 0.1) embeddings, Xavier-scaled projections, zero biases."""
    rng = np.random.default_rng(seed)
    d, dh, K = cfg.d, cfg.d_head, cfg.n_heads
    two_d = 2 * d

    def xavier(rows, cols):
        bound = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-bound, bound, size=(rows, cols))

    params: dict[str, np.ndarray] = {
        "E_text": rng.uniform(-0.1, 0.1, size=(cfg.text_vocab, d)),
        "E_attr": rng.uniform(-0.1, 0.1, size=(cfg.attr_vocab, d)),
        "E_dec": rng.uniform(-0.1, 0.1, size=(cfg.state_vocab, d)),
        "W_I": xavier(len(cfg.intents), d),
        "b_I": np.zeros(len(cfg.intents)),
        "W_p2": xavier(dh, two_d),
        "W_h": xavier(dh, K * dh),
        "v_p": xavier(dh, 1)[:, 0],
        "W_dc": xavier(d, d),
        "W_hh": xavier(d, d),
        "b_dc": np.zeros(d),
        "W_out": xavier(cfg.state_vocab, d),
        "b_out": np.zeros(cfg.state_vocab),
    }
    for role in ("ctx", "state", "prof", "attr"):
        params[f"W_{role}"] = xavier(d, d)
        params[f"b_{role}"] = np.zeros(d)
    for k in range(K):
        params[f"W_p_{k}"] = xavier(dh, two_d)
        params[f"W_q_{k}"] = xavier(dh, two_d)
        params[f"v_s_{k}"] = xavier(dh, 1)[:, 0]
    return params


def zero_grads(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def _softmax(x):
    x = x - np.max(x)
    e = np.exp(x)
    return e / e.sum()


# -- encoders -----------------------------------------------------------------

def encode_bag(params, role: str, ids: list[int]):
    """u = tanh(W_role @ mean(E[ids]) + b_role); empty input is the zero vector."""
    d = params["b_" + role].shape[0]
    if not ids:
        return np.zeros(d), None
    E = params[ENCODER_ROLES[role]]
    m = E[ids].mean(axis=0)
    u = np.tanh(params["W_" + role] @ m + params["b_" + role])
    return u, (ids, m, u)


def _encode_backward(params, grads, role: str, cache, du):
    if cache is None:
        return
    ids, m, u = cache
    dpre = du * (1.0 - u * u)
    grads["W_" + role] += np.outer(dpre, m)
    grads["b_" + role] += dpre
    dm = params["W_" + role].T @ dpre
    np.add.at(grads[ENCODER_ROLES[role]], ids, dm / len(ids))


# -- heads --------------------------------------------------------------------

def intent_probs(u: np.ndarray, params) -> np.ndarray:
    z = params["W_I"] @ np.maximum(u, 0.0) + params["b_I"]
    return _softmax(z)


def score_products(q: np.ndarray, P: np.ndarray, params, cfg: ModelConfig):
    """Multi-head glimpse attention over candidate vectors; returns (probs, cache)."""
    n = P.shape[0]
    K, dh = cfg.n_heads, cfg.d_head
    heads, head_caches = [], []
    for k in range(K):
        Wp, Wq, vs = params[f"W_p_{k}"], params[f"W_q_{k}"], params[f"v_s_{k}"]
        Z = P @ Wp.T                      # (n, dh)
        T = np.tanh(Z + (Wq @ q))         # (n, dh)
        a = T @ vs                        # (n,)
        alpha = _softmax(a)
        head_k = alpha @ Z                # (dh,)
        heads.append(head_k)
        head_caches.append((Z, T, alpha))
    head = np.concatenate(heads)          # (K*dh,)
    G = np.tanh(P @ params["W_p2"].T + params["W_h"] @ head)  # (n, dh)
    e = G @ params["v_p"]                 # (n,)
    probs = _softmax(e)
    return probs, (P, q, head_caches, head, G, probs)


def _score_backward(params, grads, cfg, cache, gold_index: int, weight: float):
    """Backward of -weight*log P[gold]; returns (dP, dq)."""
    P, q, head_caches, head, G, probs = cache
    n, two_d = P.shape
    K, dh = cfg.n_heads, cfg.d_head

    de = probs.copy()
    de[gold_index] -= 1.0
    de *= weight
    grads["v_p"] += G.T @ de
    dG = np.outer(de, params["v_p"]) * (1.0 - G * G)   # (n, dh)
    grads["W_p2"] += dG.T @ P
    dP = dG @ params["W_p2"]                            # (n, 2d)
    dG_sum = dG.sum(axis=0)
    grads["W_h"] += np.outer(dG_sum, head)
    dhead = params["W_h"].T @ dG_sum                    # (K*dh,)

    dq = np.zeros(two_d)
    for k in range(K):
        Z, T, alpha = head_caches[k]
        dhk = dhead[k * dh : (k + 1) * dh]
        dZ = np.outer(alpha, dhk)                       # head_k = sum alpha_j Z_j
        dalpha = Z @ dhk
        da = alpha * (dalpha - alpha @ dalpha)          # softmax backward
        grads[f"v_s_{k}"] += T.T @ da
        dT = np.outer(da, params[f"v_s_{k}"]) * (1.0 - T * T)
        dZ += dT
        Wp, Wq = params[f"W_p_{k}"], params[f"W_q_{k}"]
        grads[f"W_p_{k}"] += dZ.T @ P
        dP += dZ @ Wp
        dT_sum = dT.sum(axis=0)
        grads[f"W_q_{k}"] += np.outer(dT_sum, q)
        dq += Wq.T @ dT_sum
    return dP, dq


# -- decoder ------------------------------------------------------------------

def _decoder_forward(params, u, prev_ids: list[int]):
    """Teacher-forced recurrent hidden states and logits for each step.

    H_t = tanh(E_dec[prev_t] + W_dc u + W_hh H_{t-1} + b_dc), H_{-1} = 0.
    """
    d = params["b_dc"].shape[0]
    base = params["E_dec"][prev_ids] + params["W_dc"] @ u + params["b_dc"]  # (L, d)
    H = np.zeros((len(prev_ids), d))
    h = np.zeros(d)
    for t in range(len(prev_ids)):
        h = np.tanh(base[t] + params["W_hh"] @ h)
        H[t] = h
    logits = H @ params["W_out"].T + params["b_out"]   # (L, Vs)
    return H, logits


def decode_state(u: np.ndarray, params, cfg: ModelConfig, state_vocab: Vocab,
                 max_len: int | None = None) -> list[str]:
    """Greedy decoding of the state token sequence from a context vector."""
    max_len = max_len or cfg.max_state_len
    out: list[str] = []
    prev = state_vocab.id(BOS)
    eos = state_vocab.id(EOS)
    h = np.zeros(cfg.d)
    ctx = params["W_dc"] @ u + params["b_dc"]
    for _ in range(max_len):
        h = np.tanh(params["E_dec"][prev] + ctx + params["W_hh"] @ h)
        logits = params["W_out"] @ h + params["b_out"]
        nxt = int(np.argmax(logits))
        if nxt == eos:
            break
        out.append(state_vocab.token(nxt))
        prev = nxt
    return out


# -- joint loss and backward ----------------------------------------------------

def attr_sequence_tokens(product, schema) -> list[str]:
    """Delimiter-token attribute sequence, values as single symbols."""
    toks: list[str] = []
    for attr in schema.attribute_names:
        val = product.attributes.get(attr)
        if val is None:
            continue
        if toks:
            toks.append(";")
        toks.extend([attr, "=", val])
    return toks


def _mode_mask(cfg: ModelConfig, two_d: int) -> np.ndarray:
    mask = np.ones(two_d)
    d = two_d // 2
    if cfg.mode == "attr":
        mask[:d] = 0.0
    elif cfg.mode == "text":
        mask[d:] = 0.0
    elif cfg.mode != "hybrid":
        raise ValueError(f"unknown mode {cfg.mode!r}")
    return mask


def forward_backward(example, params, cfg: ModelConfig,
                     alpha: float = 1.0, beta: float = 1.0, gamma: float = 1.0,
                     compute_grads: bool = True):
    """Joint loss and (optionally) gradients for one training example.

    Returns (loss, grads, aux) where aux carries the component losses and a
    flag for examples whose gold product is missing from the candidate list
    (their search term is skipped).
    """
    d = cfg.d
    u, cache_u = encode_bag(params, "ctx", example.history_ids)
    s, cache_s = encode_bag(params, "state", example.state_ids)
    q = np.concatenate([u, s])

    n = len(example.cand_profile_ids)
    P = np.zeros((n, 2 * d))
    prof_caches, attr_caches = [], []
    for j in range(n):
        dj, cp = encode_bag(params, "prof", example.cand_profile_ids[j])
        aj, ca = encode_bag(params, "attr", example.cand_attr_ids[j])
        P[j, :d] = dj
        P[j, d:] = aj
        prof_caches.append(cp)
        attr_caches.append(ca)
    mask = _mode_mask(cfg, 2 * d)
    P = P * mask

    aux = {"skipped_search": 0}
    loss = 0.0
    grads = zero_grads(params) if compute_grads else None
    du = np.zeros(d)
    dP = np.zeros_like(P)

    # search loss
    score_cache = None
    if gamma != 0.0 and n > 0 and example.gold_index is not None:
        probs, score_cache = score_products(q, P, params, cfg)
        lp = -np.log(max(probs[example.gold_index], 1e-300))
        aux["loss_search"] = lp
        loss += gamma * lp
    else:
        aux["loss_search"] = 0.0
        if example.gold_index is None:
            aux["skipped_search"] = 1

    # intent loss
    if beta != 0.0:
        pi = intent_probs(u, params)
        li = -np.log(max(pi[example.gold_intent], 1e-300))
        aux["loss_intent"] = li
        loss += beta * li
    else:
        aux["loss_intent"] = 0.0

    # state loss (teacher forcing)
    prev_ids = example.decoder_prev_ids
    target_ids = example.decoder_target_ids
    if alpha != 0.0 and target_ids:
        H, logits = _decoder_forward(params, u, prev_ids)
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        probs_s = expl / expl.sum(axis=1, keepdims=True)
        ls = -np.log(np.maximum(probs_s[np.arange(len(target_ids)), target_ids], 1e-300)).sum()
        aux["loss_state"] = ls
        loss += alpha * ls
    else:
        aux["loss_state"] = 0.0

    if not compute_grads:
        return loss, None, aux

    if score_cache is not None:
        dP_s, dq = _score_backward(params, grads, cfg, score_cache, example.gold_index, gamma)
        dP += dP_s
        du += dq[:d]
        _encode_backward(params, grads, "state", cache_s, dq[d:])

    if beta != 0.0:
        pi = intent_probs(u, params)
        dz = pi.copy()
        dz[example.gold_intent] -= 1.0
        dz *= beta
        r = np.maximum(u, 0.0)
        grads["W_I"] += np.outer(dz, r)
        grads["b_I"] += dz
        du += (params["W_I"].T @ dz) * (u > 0)

    if alpha != 0.0 and target_ids:
        dlogits = probs_s.copy()
        dlogits[np.arange(len(target_ids)), target_ids] -= 1.0
        dlogits *= alpha
        grads["W_out"] += dlogits.T @ H
        grads["b_out"] += dlogits.sum(axis=0)
        dH = dlogits @ params["W_out"]
        # backprop through time over H_t = tanh(base_t + W_hh H_{t-1})
        L = len(prev_ids)
        dpre = np.zeros_like(H)
        carry = np.zeros(H.shape[1])
        for t in range(L - 1, -1, -1):
            dh = dH[t] + carry
            dpre[t] = dh * (1.0 - H[t] * H[t])
            grads["W_hh"] += np.outer(dpre[t], H[t - 1] if t > 0 else np.zeros_like(carry))
            carry = params["W_hh"].T @ dpre[t]
        np.add.at(grads["E_dec"], prev_ids, dpre)
        grads["W_dc"] += np.outer(dpre.sum(axis=0), u)
        grads["b_dc"] += dpre.sum(axis=0)
        du += params["W_dc"].T @ dpre.sum(axis=0)

    dP *= mask
    for j in range(n):
        _encode_backward(params, grads, "prof", prof_caches[j], dP[j, :d])
        _encode_backward(params, grads, "attr", attr_caches[j], dP[j, d:])
    _encode_backward(params, grads, "ctx", cache_u, du)
    return loss, grads, aux


def total_loss(example, params, cfg, alpha=1.0, beta=1.0, gamma=1.0):
    loss, _, _ = forward_backward(example, params, cfg, alpha, beta, gamma,
                                  compute_grads=False)
    return loss


# -- bundled parameters & checkpointing -------------------------------------------

@dataclass
class ModelParams:
    """Trained tensors plus everything needed to run them."""

    params: dict[str, np.ndarray]
    cfg: ModelConfig
    text_vocab: Vocab
    attr_vocab: Vocab
    state_vocab: Vocab
    history: list = field(default_factory=list)

    def save(self, path: str) -> None:
        meta = {
            "config": self.cfg.to_dict(),
            "text_vocab": self.text_vocab.itos,
            "attr_vocab": self.attr_vocab.itos,
            "state_vocab": self.state_vocab.itos,
            "history": self.history,
        }
        np.savez(path, __meta__=np.array(json.dumps(meta)), **self.params)

    @classmethod
    def load(cls, path: str) -> "ModelParams":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["__meta__"]))
        params = {k: data[k] for k in data.files if k != "__meta__"}
        return cls(
            params=params,
            cfg=ModelConfig.from_dict(meta["config"]),
            text_vocab=Vocab([], specials=meta["text_vocab"]),
            attr_vocab=Vocab([], specials=meta["attr_vocab"]),
            state_vocab=Vocab([], specials=meta["state_vocab"]),
            history=meta.get("history", []),
        )
