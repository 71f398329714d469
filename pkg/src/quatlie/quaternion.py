"""Quaternion arithmetic and the right module H^m.

Quaternions are stored as float64 arrays of shape (..., 4) with components
ordered (w, x, y, z) in the basis {1, i, j, k}.  Module vectors are arrays of
shape (..., m, 4); all operations broadcast over leading batch axes, which is
what the norm estimators and the spectral solver rely on for speed.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "quat",
    "ONE",
    "QI",
    "QJ",
    "QK",
    "qmul",
    "qconj",
    "qabs",
    "qconj_abs",
    "right_action",
    "vec_norm",
    "module_vector",
    "sample_ball",
    "sample_ball_batch",
    "index_rng",
]


def quat(w=0.0, x=0.0, y=0.0, z=0.0) -> np.ndarray:
    return np.array([w, x, y, z], dtype=np.float64)


ONE = quat(1.0)
QI = quat(0.0, 1.0)
QJ = quat(0.0, 0.0, 1.0)
QK = quat(0.0, 0.0, 0.0, 1.0)


def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes of (..., 4) arrays."""
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(np.broadcast_shapes(p.shape, q.shape), dtype=np.float64)
    out[..., 0] = pw * qw - px * qx - py * qy - pz * qz
    out[..., 1] = pw * qx + px * qw + py * qz - pz * qy
    out[..., 2] = pw * qy - px * qz + py * qw + pz * qx
    out[..., 3] = pw * qz + px * qy - py * qx + pz * qw
    return out


def qconj(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def qabs(q: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(q * q, axis=-1))


def qconj_abs(q: np.ndarray):
    """Return (conjugate, modulus); conj(q)*q == |q|^2 * 1."""
    return qconj(q), qabs(q)


def module_vector(*components) -> np.ndarray:
    """Stack quaternions into a module vector of shape (m, 4)."""
    return np.stack([np.asarray(c, dtype=np.float64) for c in components], axis=0)


def right_action(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Apply the right scalar action componentwise: (v.q)_i = v_i q."""
    return qmul(v, np.asarray(q)[..., None, :])


def vec_norm(v: np.ndarray) -> np.ndarray:
    """Euclidean norm of the 4m real coordinates, over the last two axes."""
    return np.sqrt(np.sum(v * v, axis=(-2, -1)))


def index_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for sample `index`: key = seed XOR index.

    Philox is splittable, so per-sample substreams are independent of the
    order in which samples are drawn (parallel reductions stay deterministic).
    """
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(index)) & (2**64 - 1)))


def _sphere_point(rng: np.random.Generator, m: int, eps: float) -> np.ndarray:
    v = rng.standard_normal((m, 4))
    nrm = np.sqrt(np.sum(v * v))
    while nrm == 0.0:  # probability-zero guard
        v = rng.standard_normal((m, 4))
        nrm = np.sqrt(np.sum(v * v))
    return v * (eps / nrm)


def sample_ball(m: int, eps: float, mode: str, seed: int, index: int = 0) -> np.ndarray:
    """Draw one vector from B(0, eps) in H^m, deterministically from (seed, index).

    mode="sphere" returns ||v|| = eps exactly (normalized Gaussian draw);
    mode="interior" draws the radius as eps * u^(1/(4m)), which biases samples
    toward the boundary shell where the supremum estimators' maximizers live.
    """
    if eps <= 0:
        raise ValueError(f"sample_ball requires eps > 0, got {eps}")
    if m < 1:
        raise ValueError(f"sample_ball requires m >= 1, got {m}")
    if mode not in ("sphere", "interior"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = index_rng(seed, index)
    v = _sphere_point(rng, m, eps)
    if mode == "interior":
        u = rng.uniform()
        v = v * u ** (1.0 / (4 * m))
    return v


def sample_ball_batch(m: int, eps: float, mode: str, seed: int, count: int,
                      start_index: int = 0) -> np.ndarray:
    """Batch of `count` draws, sample i using substream seed XOR (start_index+i)."""
    return np.stack(
        [sample_ball(m, eps, mode, seed, index=start_index + i) for i in range(count)],
        axis=0,
    )
