"""Kernel families and Gram matrix assembly.

Data matrices use the column-sample convention throughout the package: an
array of shape (d, n) holds n samples of dimension d, one sample per column.

Three kernel families are provided:

* ``Linear``  -- plain inner product.
* ``Laplace`` -- exp(-||x - z||_2 / bandwidth).
* ``NtkFc``   -- the neural tangent kernel of an infinite-width
  fully-connected ReLU network with a configurable number of hidden layers
  and an optional per-layer offset (bias) term.

Gram assembly is blocked into square tiles (default edge 256 samples) that
write disjoint regions of the output and may be filled by a thread pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, InputError, NumericError

# Cosines may drift past +/-1 by roundoff; anything beyond this slack is a bug.
COSINE_SLACK = 1e-9
DEFAULT_TILE = 256


@dataclass(frozen=True)
class Linear:
    """Inner-product kernel K(x, z) = <x, z>."""


@dataclass(frozen=True)
class Laplace:
    """Laplace kernel K(x, z) = exp(-||x - z||_2 / bandwidth)."""

    bandwidth: float = 10.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InputError(f"Laplace bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class NtkFc:
    """Fully-connected ReLU NTK with `depth` hidden layers.

    ``bias`` adds an offset term beta at every layer: the recursion starts
    from S^0(x, z) = <x, z> + beta^2 and adds beta^2 after each layer map.
    """

    depth: int = 5
    bias: float = 0.0

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise InputError(f"NtkFc depth must be an integer >= 1, got {self.depth}")
        if self.bias < 0:
            raise InputError(f"NtkFc bias must be >= 0, got {self.bias}")


KernelSpec = Union[Linear, Laplace, NtkFc]


def parse_kernel(text: str) -> KernelSpec:
    """Parse a kernel spec string: ``linear``, ``laplace[:L]``, ``ntk[:depth[,bias]]``."""
    name, _, args = text.strip().lower().partition(":")
    parts = [a for a in args.split(",") if a] if args else []
    kv = {}
    pos = []
    for part in parts:
        if "=" in part:
            k, v = part.split("=", 1)
            kv[k.strip()] = float(v)
        else:
            pos.append(float(part))
    try:
        if name == "linear":
            return Linear()
        if name == "laplace":
            bw = kv.pop("bandwidth", kv.pop("l", pos[0] if pos else 10.0))
            return Laplace(bandwidth=bw)
        if name in ("ntk", "ntkfc"):
            depth = int(kv.pop("depth", pos[0] if pos else 5))
            bias = kv.pop("bias", pos[1] if len(pos) > 1 else 0.0)
            return NtkFc(depth=depth, bias=bias)
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad kernel arguments in {text!r}: {exc}") from None
    raise InputError(f"unknown kernel family {name!r}")


def format_kernel(spec: KernelSpec) -> str:
    if isinstance(spec, Linear):
        return "linear"
    if isinstance(spec, Laplace):
        return f"laplace:{spec.bandwidth!r}"
    if isinstance(spec, NtkFc):
        return f"ntk:depth={spec.depth},bias={spec.bias!r}"
    raise InputError(f"not a kernel spec: {spec!r}")


def _clamp_cosine(u):
    """Clamp cosines to [-1, 1], rejecting overshoot beyond COSINE_SLACK."""
    arr = np.asarray(u, dtype=float)
    bad = np.abs(arr) > 1.0 + COSINE_SLACK
    if np.any(bad):
        worst = float(np.max(np.abs(arr[bad])))
        raise InputError(f"cosine argument out of range: |u| = {worst} exceeds 1 + {COSINE_SLACK}")
    return np.clip(arr, -1.0, 1.0)


def kappa0(u):
    """Arc-cosine component kappa0(u) = (pi - arccos u) / pi on [-1, 1]."""
    c = _clamp_cosine(u)
    out = (math.pi - np.arccos(c)) / math.pi
    return float(out) if np.ndim(u) == 0 else out


def kappa1(u):
    """Arc-cosine component kappa1(u) = (u (pi - arccos u) + sqrt(1 - u^2)) / pi."""
    c = _clamp_cosine(u)
    out = (c * (math.pi - np.arccos(c)) + np.sqrt(np.maximum(0.0, 1.0 - c * c))) / math.pi
    return float(out) if np.ndim(u) == 0 else out


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InputError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Evaluate K(x, x2) for a single pair of vectors.

    This scalar path is kept independent of the vectorized Gram assembly so
    the two can be checked against each other.
    """
    xv = _as_vector(x, "x")
    zv = _as_vector(x2, "x2")
    if xv.shape[0] != zv.shape[0]:
        raise InputError(f"dimension mismatch: {xv.shape[0]} vs {zv.shape[0]}")
    if isinstance(spec, Linear):
        return float(xv @ zv)
    if isinstance(spec, Laplace):
        return float(math.exp(-np.linalg.norm(xv - zv) / spec.bandwidth))
    if isinstance(spec, NtkFc):
        b2 = spec.bias * spec.bias
        sxz = float(xv @ zv) + b2
        sxx = float(xv @ xv) + b2
        szz = float(zv @ zv) + b2
        if sxx == 0.0 and szz == 0.0:
            raise DegenerateInputError(
                "NTK recursion is degenerate: both inputs are zero with bias 0")
        theta = sxz
        for _ in range(spec.depth):
            norm = math.sqrt(sxx * szz)
            lam = float(_clamp_cosine(sxz / norm)) if norm > 0 else 0.0
            sxz = norm * kappa1(lam) + b2
            theta = theta * kappa0(lam) + sxz
            sxx += b2
            szz += b2
        return theta
    raise InputError(f"not a kernel spec: {spec!r}")


def _check_matrix(X, name: str) -> np.ndarray:
    M = np.asarray(X, dtype=float)
    if M.ndim != 2:
        raise InputError(f"{name} must be 2-D (d, n), got shape {M.shape}")
    if M.shape[0] < 1:
        raise InputError(f"{name} must have feature dimension >= 1")
    return M


def _tiles(n: int, m: int, tile: int):
    for i0 in range(0, max(n, 1), tile):
        i1 = min(i0 + tile, n)
        if i0 >= n:
            break
        for j0 in range(0, max(m, 1), tile):
            j1 = min(j0 + tile, m)
            if j0 >= m:
                break
            yield i0, i1, j0, j1


def _ntk_block(Xb, Zb, sx0, sz0, depth: int, b2: float) -> np.ndarray:
    """Vectorized NTK recursion on one tile.

    sx0/sz0 are the layer-0 self kernels <x,x>+b2 of the tile's columns; the
    self recursion reduces to adding b2 per layer, so only the cross term
    needs the arc-cosine maps.
    """
    s = Xb.T @ Zb + b2
    theta = s.copy()
    sx = sx0.copy()
    sz = sz0.copy()
    for _ in range(depth):
        norm = np.sqrt(np.outer(sx, sz))
        lam = np.divide(s, norm, out=np.zeros_like(s), where=norm > 0)
        if np.any(np.abs(lam) > 1.0 + COSINE_SLACK):
            raise NumericError("NTK cosine overshoot beyond roundoff tolerance")
        np.clip(lam, -1.0, 1.0, out=lam)
        k0 = (math.pi - np.arccos(lam)) / math.pi
        k1 = (lam * (math.pi - np.arccos(lam)) + np.sqrt(np.maximum(0.0, 1.0 - lam * lam))) / math.pi
        s = norm * k1 + b2
        theta = theta * k0 + s
        sx = sx + b2
        sz = sz + b2
    return theta


def gram(spec: KernelSpec, X, Z=None, *, tile: int = DEFAULT_TILE,
         threads: int = 1) -> np.ndarray:
    """Assemble the |X| x |Z| kernel matrix; Z=None means Z = X.

    Entry (i, j) equals ``kernel_eval(spec, X[:, i], Z[:, j])``. Tiles write
    disjoint output regions, so they are filled concurrently when
    ``threads > 1``; the result for X is Z is exactly symmetric because both
    triangles run the same floating-point reductions.
    """
    Xm = _check_matrix(X, "X")
    Zm = Xm if Z is None else _check_matrix(Z, "Z")
    if Xm.shape[0] != Zm.shape[0]:
        raise InputError(f"feature dimension mismatch: {Xm.shape[0]} vs {Zm.shape[0]}")
    if tile < 1:
        raise InputError("tile edge must be >= 1")
    n, m = Xm.shape[1], Zm.shape[1]
    out = np.empty((n, m), dtype=float)
    if n == 0 or m == 0:
        return out

    if isinstance(spec, Linear):
        def fill(i0, i1, j0, j1):
            out[i0:i1, j0:j1] = Xm[:, i0:i1].T @ Zm[:, j0:j1]
    elif isinstance(spec, Laplace):
        bw = spec.bandwidth

        def fill(i0, i1, j0, j1):
            out[i0:i1, j0:j1] = np.exp(-cdist(Xm[:, i0:i1].T, Zm[:, j0:j1].T) / bw)
    elif isinstance(spec, NtkFc):
        b2 = spec.bias * spec.bias
        sx0 = np.einsum("ij,ij->j", Xm, Xm) + b2
        sz0 = sx0 if Zm is Xm else np.einsum("ij,ij->j", Zm, Zm) + b2
        if b2 == 0.0 and np.any(sx0 == 0.0) and np.any(sz0 == 0.0):
            raise DegenerateInputError(
                "NTK Gram is degenerate: zero columns on both sides with bias 0")

        def fill(i0, i1, j0, j1):
            out[i0:i1, j0:j1] = _ntk_block(
                Xm[:, i0:i1], Zm[:, j0:j1], sx0[i0:i1], sz0[j0:j1], spec.depth, b2)
    else:
        raise InputError(f"not a kernel spec: {spec!r}")

    jobs = list(_tiles(n, m, tile))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # list() propagates the first worker exception
            list(pool.map(lambda t: fill(*t), jobs))
    else:
        for t in jobs:
            fill(*t)
    return out
