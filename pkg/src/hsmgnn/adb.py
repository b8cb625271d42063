"""Adaptive distance bank: memory-driven refinement of the SPD-branch graph.

The base adjacency comes from a node-feature dot product; a trainable
memory matrix queried bilinearly against the SPD slices feeds a small
FFN that emits one sigmoid scaling factor per sensor, applied as a
residual row rescaling. No eigen or Cholesky decomposition anywhere:
everything is plain matrix multiplication.
"""

from __future__ import annotations

from . import tensor as T
from .errors import ContractError, ShapeError
from .tensor import Tensor


def node_features(u_d: Tensor) -> Tensor:
    """Flatten SPD slices (B, N, N, M) into per-node vectors (B, N, N*M)."""
    b, n, n2, m = u_d.shape
    return T.reshape(u_d, (b, n, n2 * m))


def base_adjacency(u_d: Tensor) -> Tensor:
    """softmax(relu(Z Z^T)) over flattened node features; rows sum to 1."""
    z = node_features(u_d)
    return T.softmax_rows(T.relu(T.matmul(z, T.transpose(z, (0, 2, 1)))))


def bilinear_query(u_d: Tensor, bank: Tensor) -> Tensor:
    """Per window slice: Xi^T U_m Xi. (B, N, N, M) -> (B, M_q, M_q, M)."""
    b, n, n2, m = u_d.shape
    if bank.shape[0] != n:
        raise ShapeError(f"memory bank rows {bank.shape} do not match N={n}")
    u = T.transpose(u_d, (0, 3, 1, 2))          # (B, M, N, N)
    right = T.matmul(u, bank)                   # (B, M, N, M_q)
    q = T.matmul(T.transpose(bank, (1, 0)), right)  # (B, M, M_q, M_q)
    return T.transpose(q, (0, 2, 3, 1))


def ndv(q: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Nonlinear distance vector from the query stack.

    Flattens all window slices jointly, applies affine -> relu -> affine
    -> sigmoid; output lies in (0, 1)^N.
    """
    b = q.shape[0]
    flat = T.reshape(q, (b, q.size // b))
    h = T.relu(T.add(T.matmul(flat, T.transpose(w1, (1, 0))), b1))
    return T.sigmoid(T.add(T.matmul(h, T.transpose(w2, (1, 0))), b2))


def refine_adjacency(alpha: Tensor, a_base: Tensor) -> Tensor:
    """Residual row rescaling: row i of the result is (1 + alpha_i) * row i."""
    if (alpha.data < 0).any():
        raise ContractError("negative distance factors are not admissible")
    b, n = alpha.shape
    gate = T.reshape(alpha, (b, n, 1))
    return T.add(T.mul(gate, a_base), a_base)
