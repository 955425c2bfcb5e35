"""Quadrature on ordered simplices with singular diagonals.

Integrands of the form ``prod_B s_B^{e_B} * smooth`` where each ``s_B`` is the
sum of a contiguous run of gaps are handled by sector decomposition: the
simplex of gaps is split according to which gap is largest, and inside each
chain of remaining gaps recursively according to the largest one.  In every
sector the block sums factor into monomials of the sector coordinates times a
bounded smooth factor, so a tensor Gauss-Jacobi rule with weight ``v^beta``
(and ``v^beta (-log v)`` for logarithmic factors) integrates the singular part
exactly and the smooth part spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np
from scipy import linalg, special

MAX_TENSOR_POINTS = 3_000_000


# --------------------------------------------------------------------------
# One-dimensional rules on [0, 1]
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gauss_jacobi01(q: int, beta: float, alpha: float):
    x, w = special.roots_jacobi(q, alpha, beta)
    nodes = 0.5 * (x + 1.0)
    weights = w * 0.5 ** (alpha + beta + 1.0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_jacobi01(q: int, beta: float = 0.0, alpha: float = 0.0):
    """Gauss rule for the weight ``v^beta (1-v)^alpha`` on ``[0, 1]``."""
    if beta <= -1 or alpha <= -1:
        raise ValueError(f"weight exponent must exceed -1 (beta={beta}, alpha={alpha})")
    return _gauss_jacobi01(int(q), float(beta), float(alpha))


def _chebyshev_recurrence(moments, q):
    """Recurrence coefficients from ordinary moments (Chebyshev algorithm)."""
    a = [mpmath.mpf(0)] * q
    b = [mpmath.mpf(0)] * q
    sig_prev = [mpmath.mpf(0)] * (2 * q)
    sig = list(moments)
    a[0] = moments[1] / moments[0]
    b[0] = moments[0]
    for k in range(1, q):
        sig_new = [mpmath.mpf(0)] * (2 * q)
        for l in range(k, 2 * q - k):
            sig_new[l] = sig[l + 1] - a[k - 1] * sig[l] - b[k - 1] * sig_prev[l]
        a[k] = sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1]
        b[k] = sig_new[k] / sig[k - 1]
        sig_prev, sig = sig, sig_new
    return a, b


@lru_cache(maxsize=None)
def _log_jacobi01(q: int, beta: float):
    with mpmath.workdps(40 + 3 * q):
        bb = mpmath.mpf(beta)
        moments = [1 / (bb + k + 1) ** 2 for k in range(2 * q)]
        a, b = _chebyshev_recurrence(moments, q)
        diag = np.array([float(x) for x in a])
        off = np.array([float(mpmath.sqrt(x)) for x in b[1:]])
        mass = float(b[0])
    nodes, vecs = linalg.eigh_tridiagonal(diag, off)
    weights = mass * vecs[0, :] ** 2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def log_jacobi01(q: int, beta: float = 0.0):
    """Gauss rule for the weight ``v^beta * (-log v)`` on ``[0, 1]``."""
    if beta <= -1:
        raise ValueError(f"weight exponent must exceed -1 (beta={beta})")
    return _log_jacobi01(int(q), round(float(beta), 15))


def graded_rule(length: float, panels: int = 24, npts: int = 10, ratio: float = 0.2):
    """Composite Gauss-Legendre rule on ``[0, length]`` graded towards 0."""
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    edges = length * ratio ** np.arange(panels + 1)
    edges = np.append(edges, 0.0)[::-1]
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(lo + (hi - lo) * x)
        weights.append((hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def ordered_simplex_rule(p: int, q: int):
    """Nodes (sorted rows) and weights for the ordered simplex in ``[0,1]^p``.

    Uses ``y_p = u_p``, ``y_l = y_{l+1} u_l`` whose Jacobian is a monomial that
    Gauss-Jacobi absorbs exactly.  Weights sum to ``1/p!``.
    """
    if p == 0:
        return np.zeros((1, 0)), np.ones(1)
    rules = [gauss_jacobi01(q, float(l)) for l in range(p)]  # u_{l+1} carries u^l
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    y = np.empty_like(u)
    y[:, p - 1] = u[:, p - 1]
    for l in range(p - 2, -1, -1):
        y[:, l] = y[:, l + 1] * u[:, l]
    return y, w


# --------------------------------------------------------------------------
# Sector decomposition on the gap simplex
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """Contiguous run of gaps ``lo..hi`` (inclusive) entering as ``h(s)^exponent``.

    ``kind='r'`` means ``h = r`` from the kernel, ``kind='pow'`` means ``h(s) = s``.
    ``log_coef`` adds ``log_coef * (-log h(s))`` to the logarithmic prefactor.
    """

    lo: int
    hi: int
    exponent: float = 0.0
    log_coef: float = 0.0
    kind: str = "r"

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


def _chain_trees(lo: int, hi: int, multi: tuple):
    """All Cartesian trees of the chain ``lo..hi`` needed to resolve ``multi``."""
    if lo > hi:
        return [{}]
    if not any(lo <= a and b <= hi for a, b in multi):
        return [{i: None for i in range(lo, hi + 1)}]
    out = []
    for i in range(lo, hi + 1):
        for left in _chain_trees(lo, i - 1, multi):
            for right in _chain_trees(i + 1, hi, multi):
                tree = {i: None}
                for part in (left, right):
                    for node, par in part.items():
                        tree[node] = i if par is None else par
                out.append(tree)
    return out


@lru_cache(maxsize=None)
def sector_parents(n_gaps: int, multi: tuple):
    """Parent arrays of all sectors; ``multi`` lists the multi-gap block ranges."""
    sectors = []
    m = n_gaps - 1
    for j in range(n_gaps):
        for left in _chain_trees(0, j - 1, multi):
            for right in _chain_trees(j + 1, m, multi):
                parent = [-1] * n_gaps
                for part in (left, right):
                    for node, par in part.items():
                        parent[node] = j if par is None else par
                sectors.append((j, tuple(parent)))
    return tuple(sectors)


class _Sector:
    def __init__(self, root: int, parent: Sequence[int], blocks: Sequence[Block]):
        n = len(parent)
        self.root = root
        self.parent = parent
        depth = [0] * n
        order = [root]
        children = [[] for _ in range(n)]
        for v in range(n):
            if v != root:
                children[parent[v]].append(v)
        k = 0
        while k < len(order):
            for c in children[order[k]]:
                depth[c] = depth[order[k]] + 1
                order.append(c)
            k += 1
        self.order = order
        self.vars = [v for v in range(n) if v != root]
        self.var_index = {v: i for i, v in enumerate(self.vars)}
        # ancestors-or-self, excluding the root
        anc = []
        for v in range(n):
            path = []
            u = v
            while u != root:
                path.append(u)
                u = parent[u]
            anc.append(path)
        self.tops = []
        for b in blocks:
            members = range(b.lo, b.hi + 1)
            top = min(members, key=lambda u: depth[u])
            if sum(1 for u in members if depth[u] == depth[top]) != 1:
                raise RuntimeError("sector tree does not resolve a block")
            self.tops.append(top)
        size = [1] * n
        for v in reversed(order):
            if v != root:
                size[parent[v]] += size[v]
        self.beta = np.zeros(len(self.vars))
        self.log_c = np.zeros(len(self.vars))
        for v in self.vars:
            self.beta[self.var_index[v]] = size[v] - 1
        for b, top in zip(blocks, self.tops):
            for v in anc[top]:
                self.beta[self.var_index[v]] += b.exponent
                self.log_c[self.var_index[v]] += b.log_coef

    def gaps(self, V: np.ndarray) -> np.ndarray:
        """Projective gap coordinates ``z`` (root gap equal to 1)."""
        z = np.empty((V.shape[0], len(self.parent)))
        z[:, self.root] = 1.0
        for v in self.order[1:]:
            z[:, v] = V[:, self.var_index[v]] * z[:, self.parent[v]]
        return z


class SimplexIntegrand:
    """``int_Delta prod_B h_B(s_B)^{e_B} [sum_B c_B (-log h_B(s_B))] extra(g) dg``.

    The bracket is omitted (taken as 1) when every ``log_coef`` is zero.
    ``extra`` is an optional smooth callable of the gap array ``(N, n_gaps)``.
    """

    def __init__(self, n_gaps: int, blocks: Sequence[Block], kernel=None,
                 extra: Optional[Callable] = None):
        if n_gaps < 1:
            raise ValueError("need at least one gap")
        for b in blocks:
            if not 0 <= b.lo <= b.hi < n_gaps:
                raise ValueError(f"block {b} outside gap range")
            if b.kind not in ("r", "pow"):
                raise ValueError(f"unknown block kind {b.kind!r}")
        self.n_gaps = n_gaps
        self.blocks = tuple(blocks)
        self.kernel = kernel
        self.extra = extra
        self.has_log = any(b.log_coef != 0 for b in self.blocks)
        multi = tuple(sorted({(b.lo, b.hi) for b in self.blocks if b.size > 1}))
        self.sectors = [_Sector(j, par, self.blocks) for j, par in sector_parents(n_gaps, multi)]
        for sec in self.sectors:
            if np.any(sec.beta <= -1):
                raise ValueError("integrand is not integrable: a diagonal exponent "
                                 f"sum reaches {sec.beta.min():.6g} <= -1")

    @property
    def dim(self) -> int:
        return self.n_gaps - 1

    def _smooth(self, sec: _Sector, V: np.ndarray):
        """Integrand divided by the monomial weight; also the smooth log part."""
        z = sec.gaps(V)
        s1 = z.sum(axis=1)
        g = z / s1[:, None]
        csum = np.concatenate([np.zeros((z.shape[0], 1)), np.cumsum(z, axis=1)], axis=1)
        phi = s1 ** (-float(self.n_gaps))
        logpart = np.zeros(z.shape[0]) if self.has_log else None
        log_s1 = np.log(s1)
        for b, top in zip(self.blocks, sec.tops):
            bz = csum[:, b.hi + 1] - csum[:, b.lo]
            ratio = bz / z[:, top]
            s_b = bz / s1
            smooth_b = None
            if b.kind == "r" and self.kernel is not None and not self.kernel.is_canonical:
                smooth_b = self.kernel.smooth_part(s_b)
            if b.exponent != 0:
                phi = phi * (ratio / s1) ** b.exponent
                if smooth_b is not None:
                    phi = phi * np.exp(b.exponent * smooth_b)
            if b.log_coef != 0:
                term = -np.log(ratio) + log_s1
                if smooth_b is not None:
                    term = term - smooth_b
                logpart += b.log_coef * term
        if self.extra is not None:
            phi = phi * self.extra(g)
        return phi, logpart

    def _tensor(self, rules):
        if self.dim == 0:
            return np.zeros((1, 0)), np.ones(1)
        npts = int(np.prod([len(r[0]) for r in rules]))
        if npts > MAX_TENSOR_POINTS:
            raise RuntimeError(f"tensor rule with {npts} points exceeds the budget")
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        V = np.stack([gr.ravel() for gr in grids], axis=1)
        W = np.prod(np.stack([gr.ravel() for gr in wgrids], axis=1), axis=1)
        return V, W

    def tensor_gauss(self, q: int) -> tuple:
        """Tensor Gauss-Jacobi value and the number of integrand evaluations."""
        total = []
        evals = 0
        for sec in self.sectors:
            rules = [gauss_jacobi01(q, b) for b in sec.beta]
            V, W = self._tensor(rules)
            phi, logpart = self._smooth(sec, V)
            evals += len(W)
            if not self.has_log:
                total.append(float(np.dot(W, phi)))
                continue
            total.append(float(np.dot(W, phi * logpart)))
            for i, c in enumerate(sec.log_c):
                if c == 0:
                    continue
                lrules = list(rules)
                lrules[i] = log_jacobi01(q, sec.beta[i])
                V, W = self._tensor(lrules)
                phi, _ = self._smooth(sec, V)
                evals += len(W)
                total.append(c * float(np.dot(W, phi)))
        return math.fsum(total), evals

    def stratified_mc(self, n_per_sector: int, rng: np.random.Generator) -> tuple:
        """Importance-sampled MC per sector with antithetic pairs: (mean, stderr, evals)."""
        if n_per_sector < 4:
            raise ValueError("need at least 4 samples per sector")
        half = n_per_sector // 2
        means, variances = [], []
        for sec in self.sectors:
            U = rng.random((half, self.dim))
            vals = []
            for uu in (U, 1.0 - U):
                a = sec.beta + 1.0
                V = np.clip(uu, 1e-300, 1.0) ** (1.0 / a)
                phi, logpart = self._smooth(sec, V)
                dens = np.prod(a) if self.dim else 1.0
                if self.has_log:
                    logs = logpart + (-np.log(V)) @ sec.log_c
                    vals.append(phi * logs / dens)
                else:
                    vals.append(phi / dens)
            pair = 0.5 * (vals[0] + vals[1])
            means.append(math.fsum(pair) / half)
            variances.append(float(np.var(pair, ddof=1)) / half)
        return math.fsum(means), math.sqrt(math.fsum(variances)), 2 * half * len(self.sectors)


DEFAULT_ORDERS = {0: 1, 1: 24, 2: 20, 3: 14, 4: 10, 5: 8, 6: 6}


def integrate_simplex(integrand: SimplexIntegrand, method: str = "TensorGauss",
                      q: Optional[int] = None, target_tol: float = 1e-10,
                      max_q: int = 40, mc_samples: int = 20000, seed: int = 0):
    """Integrate with error estimate; returns ``(value, error, evaluations)``."""
    dim = integrand.dim
    if method == "StratifiedMC":
        rng = np.random.Generator(np.random.Philox(seed))
        per = max(4, mc_samples // max(1, len(integrand.sectors)))
        return integrand.stratified_mc(per, rng)
    if q is None:
        q = DEFAULT_ORDERS.get(dim, 6)
    if method == "TensorGauss":
        v1, e1 = integrand.tensor_gauss(q)
        v2, e2 = integrand.tensor_gauss(q + 4)
        return v2, abs(v2 - v1), e1 + e2
    if method == "AdaptiveSubdivision":
        # p-refinement: raise the order until successive values agree
        v_prev, evals = integrand.tensor_gauss(q)
        while True:
            q_next = q + 4
            if q_next > max_q:
                raise RuntimeError(f"tolerance {target_tol:g} not met up to order {max_q}")
            v, e = integrand.tensor_gauss(q_next)
            evals += e
            if abs(v - v_prev) <= target_tol:
                return v, abs(v - v_prev), evals
            v_prev, q = v, q_next
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# Single pair singularity: int_{simplex_n} W(s) g(s_i, s_j) ds
# --------------------------------------------------------------------------

def pair_simplex_integral(n: int, i: int, j: int, weight: Optional[Callable] = None,
                          kernel=None, g: Optional[Callable] = None, q: int = 12) -> float:
    """``int_{0<s_1<...<s_n<1} W(s) g(s_i, s_j) ds`` for 1-based ``i < j``.

    Coordinates are the pair gap ``D = s_j - s_i`` and ``s_i = (1-D) a``; the
    remaining points live in three ordered sub-simplices.  For a kernel the
    ``-log D`` part of ``g`` is integrated with a log-weighted Gauss rule;
    a plain callable ``g(D)`` is treated as smooth.
    """
    if not 1 <= i < j <= n:
        raise ValueError("need 1 <= i < j <= n")
    n_in = j - i - 1
    n_before = i - 1
    n_after = n - j
    a_nodes, a_w = gauss_jacobi01(q, float(n_before), float(n_after))
    yb, wb = ordered_simplex_rule(n_before, q)
    yi, wi = ordered_simplex_rule(n_in, q)
    ya, wa = ordered_simplex_rule(n_after, q)

    def accumulate(D_nodes, D_w, gfac):
        total = []
        for d, dw, gf in zip(D_nodes, D_w, gfac):
            # tensor over (a, before, inner, after)
            shape = (len(a_nodes), len(wb), len(wi), len(wa))
            si = ((1.0 - d) * a_nodes)[:, None, None, None, None]
            sj = si + d
            pts = [si * yb[None, :, None, None, :],
                   si,
                   si + d * yi[None, None, :, None, :],
                   sj,
                   sj + (1.0 - sj) * ya[None, None, None, :, :]]
            pts = [np.broadcast_to(p, shape + (p.shape[-1],)) for p in pts]
            s = np.concatenate(pts, axis=-1).reshape(-1, n)
            W = (a_w[:, None, None, None] * wb[None, :, None, None]
                 * wi[None, None, :, None] * wa[None, None, None, :]).ravel()
            val = W if weight is None else W * weight(s)
            jac = (1.0 - d) ** (1 + n_before + n_after)
            total.append(dw * gf * jac * math.fsum(val))
        return math.fsum(total)

    if g is not None and kernel is None:
        D, Dw = gauss_jacobi01(q, float(n_in))
        return accumulate(D, Dw, [float(g(x)) for x in D])
    if kernel is None:
        raise ValueError("provide a kernel or a gap function g")
    D, Dw = log_jacobi01(q, float(n_in))
    out = accumulate(D, Dw, np.ones(len(D)))
    if not kernel.is_canonical:
        D, Dw = gauss_jacobi01(q, float(n_in))
        out -= accumulate(D, Dw, kernel.smooth_part(D))
    return out


def cube_simplex_rule(n: int, q: int):
    """Tensor Gauss-Legendre rule on ``[0,1]^n`` (for exchangeability checks)."""
    x, w = gauss_jacobi01(q, 0.0)
    grids = np.meshgrid(*([x] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    W = np.prod(np.stack([gr.ravel() for gr in wgrids], axis=1), axis=1)
    return pts, W
