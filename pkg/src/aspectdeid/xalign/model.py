"""Forward and backward passes of the cross-attention alignment model.

The attention block scores query/key pairs with a scaled sigmoid instead of
softmax, then normalizes the scores per query row to weight the values. A
dropout + batch-norm stage stabilizes the hidden outputs; in training the
batch statistics span every row of every instance in the forward call (so
pooled per-instance means stay informative), and running estimates are frozen
for inference. Gradients are derived by hand and checked against finite
differences (see gradcheck).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..corpus import SensitiveDocument
from ..errors import InvalidInputError, ShapeError, UntrainedParamsError
from .config import XAlignConfig
from .params import BN_EPS, TRAINABLE, XAlignParams

_CAS_LO = 1e-300
_CAS_HI = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class CasMatrix:
    """Raw sigmoid attention scores, query rows by key columns, each in (0,1)."""

    scores: np.ndarray

    def __post_init__(self):
        if self.scores.ndim != 2:
            raise ShapeError("CAS must be a 2-d matrix")
        if not ((self.scores > 0.0) & (self.scores < 1.0)).all():
            raise ShapeError("CAS entries must lie strictly in (0,1)")


@dataclass(frozen=True)
class HiddenStates:
    h: np.ndarray  # (q_len, D)
    z: np.ndarray  # (D,) mean over rows

    @classmethod
    def from_h(cls, h: np.ndarray) -> "HiddenStates":
        return cls(h=h, z=h.mean(axis=0))


@dataclass(frozen=True)
class ForwardResult:
    """Public view of one forward pass."""

    hidden: HiddenStates
    cas: CasMatrix
    logits: np.ndarray | None
    query_embeddings: np.ndarray


def document_matrix(document) -> np.ndarray:
    if isinstance(document, SensitiveDocument):
        mat = np.stack([ss.embedding for ss in document.sub_sentences]).astype(np.float64)
    else:
        mat = np.asarray(document, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise InvalidInputError("document must provide a non-empty (k, D) embedding matrix")
    return mat


# --------------------------------------------------------------------------
# Attention stage (per instance)


@dataclass
class AttnCache:
    query_raw: np.ndarray
    keys_raw: np.ndarray
    values_raw: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    cas: np.ndarray
    rowsum: np.ndarray
    attn: np.ndarray
    pre_norm: np.ndarray
    aspect_idx: np.ndarray | None


def attn_forward(
    query_raw: np.ndarray,
    keys_raw: np.ndarray,
    params: XAlignParams,
    config: XAlignConfig,
    values_raw: np.ndarray | None = None,
    aspect_idx: np.ndarray | None = None,
) -> AttnCache:
    d = params.dimension
    query_raw = np.asarray(query_raw, dtype=np.float64)
    keys_raw = np.asarray(keys_raw, dtype=np.float64)
    values_raw = keys_raw if values_raw is None else np.asarray(values_raw, dtype=np.float64)
    if query_raw.ndim != 2 or keys_raw.ndim != 2:
        raise ShapeError("queries and keys must be 2-d")
    if query_raw.shape[0] == 0 or keys_raw.shape[0] == 0:
        raise InvalidInputError("query and key sequences must be non-empty")
    if query_raw.shape[1] != d or keys_raw.shape[1] != d:
        raise ShapeError("query/key width does not match parameter dimension")
    if values_raw.shape[0] != keys_raw.shape[0]:
        raise ShapeError("value row count must equal key row count")

    q = query_raw @ params["w_q"]
    k = keys_raw @ params["w_k"]
    v = values_raw @ params["w_v"]
    cas = np.clip(expit(q @ k.T / (config.tau * np.sqrt(d))), _CAS_LO, _CAS_HI)
    rowsum = cas.sum(axis=1, keepdims=True)
    attn = cas / rowsum
    return AttnCache(
        query_raw=query_raw,
        keys_raw=keys_raw,
        values_raw=values_raw,
        q=q,
        k=k,
        v=v,
        cas=cas,
        rowsum=rowsum,
        attn=attn,
        pre_norm=attn @ v,
        aspect_idx=aspect_idx,
    )


def attn_backward(
    cache: AttnCache,
    d_pre: np.ndarray,
    params: XAlignParams,
    config: XAlignConfig,
    grads: dict[str, np.ndarray],
) -> None:
    d_attn = d_pre @ cache.v.T
    dv = cache.attn.T @ d_pre
    # attn = cas / rowsum; push through the row normalization.
    d_cas = (d_attn - (d_attn * cache.attn).sum(axis=1, keepdims=True)) / cache.rowsum
    ds = d_cas * cache.cas * (1.0 - cache.cas)
    s0 = 1.0 / (config.tau * np.sqrt(params.dimension))
    dq = s0 * (ds @ cache.k)
    dk = s0 * (ds.T @ cache.q)
    grads["w_q"] += cache.query_raw.T @ dq
    grads["w_k"] += cache.keys_raw.T @ dk
    grads["w_v"] += cache.values_raw.T @ dv
    if cache.aspect_idx is not None:
        np.add.at(grads["aspect_tokens"], cache.aspect_idx, dq @ params["w_q"].T)


# --------------------------------------------------------------------------
# Dropout + batch-norm stage (over all rows of one call)


@dataclass
class NormCache:
    drop_mask: np.ndarray | None
    dropped: np.ndarray
    bn_mu: np.ndarray
    bn_var: np.ndarray
    xhat: np.ndarray
    train_mode: bool


def norm_forward(
    rows: np.ndarray,
    params: XAlignParams,
    config: XAlignConfig,
    train: bool,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, NormCache]:
    drop_mask = None
    dropped = rows
    if train and config.dropout_p > 0.0:
        if rng is None:
            raise InvalidInputError("training-mode dropout needs a random generator")
        keep = 1.0 - config.dropout_p
        drop_mask = (rng.random(rows.shape) < keep) / keep
        dropped = rows * drop_mask
    if train:
        bn_mu = dropped.mean(axis=0)
        bn_var = dropped.var(axis=0)
    else:
        bn_mu = params["bn_running_mean"]
        bn_var = params["bn_running_var"]
    xhat = (dropped - bn_mu) / np.sqrt(bn_var + BN_EPS)
    h = params["bn_gamma"] * xhat + params["bn_beta"]
    return h, NormCache(
        drop_mask=drop_mask,
        dropped=dropped,
        bn_mu=bn_mu,
        bn_var=bn_var,
        xhat=xhat,
        train_mode=train,
    )


def norm_backward(
    dh: np.ndarray,
    cache: NormCache,
    params: XAlignParams,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    grads["bn_gamma"] += (dh * cache.xhat).sum(axis=0)
    grads["bn_beta"] += dh.sum(axis=0)
    dxhat = dh * params["bn_gamma"]
    ivar = 1.0 / np.sqrt(cache.bn_var + BN_EPS)
    if cache.train_mode:
        n = dh.shape[0]
        xc = cache.dropped - cache.bn_mu
        dvar = (dxhat * xc).sum(axis=0) * (-0.5) * ivar**3
        dmu = -(dxhat.sum(axis=0)) * ivar
        d_dropped = dxhat * ivar + dvar * 2.0 * xc / n + dmu / n
    else:
        d_dropped = dxhat * ivar
    return d_dropped if cache.drop_mask is None else d_dropped * cache.drop_mask


# --------------------------------------------------------------------------
# Label head (per instance)


@dataclass
class HeadCache:
    z: np.ndarray
    u1: np.ndarray
    a1: np.ndarray
    logits: np.ndarray


def head_forward(z: np.ndarray, params: XAlignParams) -> HeadCache:
    u1 = z @ params["mlp_w1"] + params["mlp_b1"]
    a1 = np.tanh(u1)
    return HeadCache(z=z, u1=u1, a1=a1, logits=a1 @ params["mlp_w2"] + params["mlp_b2"])


def head_backward(
    cache: HeadCache,
    dlogits: np.ndarray,
    params: XAlignParams,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    """Backprop the label head; returns dL/dz."""
    grads["mlp_w2"] += np.outer(cache.a1, dlogits)
    grads["mlp_b2"] += dlogits
    da1 = dlogits @ params["mlp_w2"].T
    du1 = da1 * (1.0 - cache.a1**2)
    grads["mlp_w1"] += np.outer(cache.z, du1)
    grads["mlp_b1"] += du1
    return du1 @ params["mlp_w1"].T


# --------------------------------------------------------------------------
# Branch over a batch of instances: attention per instance, one norm call


@dataclass
class BranchBatch:
    attn: list[AttnCache]
    norm: NormCache
    h: list[np.ndarray]       # per-instance hidden rows, post norm
    z: np.ndarray             # (N, D) per-instance pooled means
    heads: list[HeadCache] | None

    @property
    def sizes(self) -> list[int]:
        return [c.pre_norm.shape[0] for c in self.attn]


def branch_batch_forward(
    queries: list[np.ndarray],
    documents: list[np.ndarray],
    params: XAlignParams,
    config: XAlignConfig,
    train: bool,
    rng: np.random.Generator | None = None,
    aspect_idx: list[np.ndarray] | None = None,
    with_head: bool = True,
) -> BranchBatch:
    caches = [
        attn_forward(
            q, doc, params, config, aspect_idx=None if aspect_idx is None else aspect_idx[i]
        )
        for i, (q, doc) in enumerate(zip(queries, documents))
    ]
    rows = np.concatenate([c.pre_norm for c in caches], axis=0)
    h_rows, norm = norm_forward(rows, params, config, train, rng)
    h_list = np.split(h_rows, np.cumsum([c.pre_norm.shape[0] for c in caches])[:-1])
    z = np.stack([h.mean(axis=0) for h in h_list])
    heads = None
    if with_head and config.aux_enabled:
        heads = [head_forward(z[i], params) for i in range(len(caches))]
    return BranchBatch(attn=caches, norm=norm, h=list(h_list), z=z, heads=heads)


def branch_batch_backward(
    batch: BranchBatch,
    dh_list: list[np.ndarray],
    params: XAlignParams,
    config: XAlignConfig,
    grads: dict[str, np.ndarray],
) -> None:
    dh_rows = np.concatenate(dh_list, axis=0)
    d_pre_rows = norm_backward(dh_rows, batch.norm, params, grads)
    offsets = np.cumsum([0] + batch.sizes)
    for i, cache in enumerate(batch.attn):
        attn_backward(cache, d_pre_rows[offsets[i] : offsets[i + 1]], params, config, grads)


# --------------------------------------------------------------------------
# Public single-instance operations


def compute_cas(
    queries: np.ndarray, keys: np.ndarray, params: XAlignParams, config: XAlignConfig
) -> CasMatrix:
    """Sigmoid of scaled inner products between projected queries and keys."""
    queries = np.asarray(queries, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    d = params.dimension
    if queries.ndim != 2 or keys.ndim != 2 or queries.shape[1] != d or keys.shape[1] != d:
        raise ShapeError(
            f"queries {queries.shape} / keys {keys.shape} do not conform to dimension {d}"
        )
    q = queries @ params["w_q"]
    k = keys @ params["w_k"]
    scores = expit(q @ k.T / (config.tau * np.sqrt(d)))
    return CasMatrix(scores=np.clip(scores, _CAS_LO, _CAS_HI))


def attend(
    queries: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    params: XAlignParams,
    config: XAlignConfig,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> tuple[HiddenStates, CasMatrix]:
    """CAS-weighted sum of projected values, then dropout (train) and batch norm.

    The normalization weights of each query row sum to 1 before dropout.
    """
    if mode not in ("train", "infer"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    if mode == "train" and config.dropout_p > 0.0 and rng is None:
        rng = np.random.default_rng(config.seed)
    cache = attn_forward(queries, keys, params, config, values_raw=np.asarray(values, dtype=np.float64))
    h, _ = norm_forward(cache.pre_norm, params, config, train=(mode == "train"), rng=rng)
    return HiddenStates.from_h(h), CasMatrix(scores=cache.cas)


def forward_pass(
    query_kind: str,
    query_embeddings: np.ndarray | None,
    document,
    params: XAlignParams,
    config: XAlignConfig,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    require_trained: bool = False,
) -> ForwardResult:
    """One full pass: attention, norm layers, and (optionally) the label head.

    Expert queries are the note's sub-sentence embeddings; aspect queries are
    rows of the aspect token table (all t rows at inference, m sampled rows
    during training). Training-time losses are computed over batches via
    forward_batch, where batch norm couples the instances.
    """
    if query_kind not in ("expert", "aspect"):
        raise InvalidInputError(f"unknown query kind {query_kind!r}")
    if mode not in ("train", "infer"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    if require_trained and not params.trained:
        raise UntrainedParamsError("inference requested on untrained parameters")
    keys = document_matrix(document)
    aspect_idx = None
    if query_kind == "aspect":
        if query_embeddings is None:
            if mode == "train":
                if rng is None:
                    raise InvalidInputError("sampling aspect queries needs a random generator")
                aspect_idx = np.sort(rng.choice(config.t, size=config.m, replace=False))
                query_embeddings = params["aspect_tokens"][aspect_idx]
            else:
                query_embeddings = params["aspect_tokens"]
    elif query_embeddings is None:
        raise InvalidInputError("expert queries require explicit embeddings")
    branch = branch_batch_forward(
        [np.asarray(query_embeddings, dtype=np.float64)],
        [keys],
        params,
        config,
        train=(mode == "train"),
        rng=rng,
        aspect_idx=None if aspect_idx is None else [aspect_idx],
    )
    return ForwardResult(
        hidden=HiddenStates.from_h(branch.h[0]),
        cas=CasMatrix(scores=branch.attn[0].cas),
        logits=None if branch.heads is None else branch.heads[0].logits.copy(),
        query_embeddings=branch.attn[0].query_raw,
    )


def zero_grads(params: XAlignParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(params[name]) for name in TRAINABLE}
