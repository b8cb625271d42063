"""Fusion graph convolution and the prediction head.

Both branches run multi-hop propagation (sums of adjacency powers times
node features, computed by repeated multiplication), get projected to a
common per-branch width, and are fused by fixed weights before a 4-layer
MLP emits the prediction.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, ShapeError
from .tensor import Tensor


def euclidean_adjacency(p_k: Tensor) -> Tensor:
    """softmax(relu(P P^T)) on raw block features, (B, N, W_p) -> (B, N, N)."""
    return T.softmax_rows(T.relu(T.matmul(p_k, T.transpose(p_k, (0, 2, 1)))))


def multihop_conv(u: Tensor, a: Tensor, r: int) -> Tensor:
    """Sum_{j=1..r} A^j U via repeated multiplication."""
    if r < 1:
        raise ConfigError(f"hop count must be >= 1, got {r}")
    h = T.matmul(a, u)
    out = h
    for _ in range(r - 1):
        h = T.matmul(a, h)
        out = T.add(out, h)
    return out


def branch_features(per_block: list[Tensor], w: Tensor, b: Tensor) -> Tensor:
    """Project each (B, N, F_raw) block output and stack: (B, D, N, F_target).

    The affine map is shared across blocks.
    """
    f_raw = per_block[0].shape[-1]
    for blk in per_block[1:]:
        if blk.shape[-1] != f_raw:
            raise ShapeError(f"inconsistent block feature widths: {f_raw} vs {blk.shape[-1]}")
    projected = [T.add(T.matmul(blk, w), b) for blk in per_block]
    return T.stack(projected, 1)


def fuse_and_predict(u_s_c: Tensor | None, u_e_c: Tensor | None,
                     w_s: float, w_e: float, mlp: dict[str, Tensor]) -> Tensor:
    """Weighted concat of branch features through the MLP head.

    Either branch may be absent (ablations); at least one must be given.
    Output is (B, 1) for regression or (B, n_classes) for classification.
    """
    parts = []
    if u_s_c is not None:
        b = u_s_c.shape[0]
        parts.append(T.reshape(T.scale(u_s_c, w_s), (b, u_s_c.size // b)))
    if u_e_c is not None:
        b = u_e_c.shape[0]
        parts.append(T.reshape(T.scale(u_e_c, w_e), (b, u_e_c.size // b)))
    if not parts:
        raise ContractError("fuse_and_predict needs at least one branch")
    u = parts[0] if len(parts) == 1 else T.concat(parts, 1)
    if u.shape[1] != mlp["w1"].shape[1]:
        raise ShapeError(
            f"fused width {u.shape[1]} does not match MLP input {mlp['w1'].shape[1]}"
        )
    h = u
    for i in (1, 2, 3):
        h = T.relu(T.add(T.matmul(h, T.transpose(mlp[f"w{i}"], (1, 0))), mlp[f"b{i}"]))
    return T.add(T.matmul(h, T.transpose(mlp["w4"], (1, 0))), mlp["b4"])


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over the batch."""
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.size == 0:
        raise ContractError("empty batch")
    if pred.size != target.size:
        raise ShapeError(f"prediction count {pred.size} != target count {target.size}")
    diff = T.add(T.reshape(pred, (target.size,)), Tensor(-target))
    return T.mean_all(T.mul(diff, diff))


def cross_entropy_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Softmax cross-entropy with integer class labels."""
    labels = np.asarray(labels).reshape(-1).astype(int)
    if labels.size == 0:
        raise ContractError("empty batch")
    if logits.shape[0] != labels.size:
        raise ShapeError(f"batch mismatch: {logits.shape[0]} logits vs {labels.size} labels")
    probs = T.softmax_rows(logits)
    onehot = np.zeros(logits.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    # -mean log p[label]; computed through log of the picked probability
    picked = T.sum_axis(T.mul(probs, Tensor(onehot)), 1)
    return T.scale(T.mean_all(T.log(picked)), -1.0)
