"""Uniform 1D meshes, zero-extended grid functions, and singular quadrature.

The double integrals behind the nonlocal norms and forms run over the whole
plane.  They are split into

* interior x interior element pairs, tensor Gauss on separated pairs and
  dyadically graded subdivision (ratio 0.5) toward the shared closure for
  touching pairs,
* interior x exterior-strip pairs on a geometrically graded strip of width
  ``tail_radius`` on either side of the interval, where the function is 0,
* a closed-form tail beyond the strip for the standard singular weight
  (``tail_mode="analytic"``), or an upper-bound bookkeeping term for general
  kernels (``tail_mode="graded-numeric"``, see ``tail_truncation_bound``).

The fixed node set produced here *defines* the discrete problem.  Every
functional, gradient, and test oracle evaluates on identical nodes, which
makes internal consistency checks exact; convergence toward the continuum
is a separate, reported question.

Identical-interval blocks use Gauss orders g and g+1 on the two axes; the
interlacing of Gauss nodes guarantees the quadrature never lands on the
diagonal x = y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ._reduction import det_scatter, det_sum
from .kernels import KernelSpec

__all__ = [
    "ConfigurationError",
    "Mesh1D",
    "QuadratureRule",
    "GridFunction",
    "lq_norm",
    "duality_pairing",
    "gagliardo_seminorm",
    "sobolev_norm",
    "w0_norm",
    "tail_truncation_bound",
    "basis_w0_norms",
    "poincare_constant",
    "pair_table",
    "single_table",
]


class ConfigurationError(ValueError):
    """Raised when a quadrature or model configuration is inconsistent."""


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Uniform partition of (a, b) with an exterior truncation radius."""

    a: float
    b: float
    n_elem: int
    tail_radius: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError("need finite endpoints with a < b")
        if self.n_elem < 2:
            raise ValueError("need at least 2 elements")
        if self.tail_radius is None:
            object.__setattr__(self, "tail_radius", 10.0 * (self.b - self.a))
        if not self.tail_radius > 0:
            raise ValueError("tail radius must be positive")
        object.__setattr__(self, "nodes", np.linspace(self.a, self.b, self.n_elem + 1))

    nodes: np.ndarray = field(init=False, repr=False)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_elem

    @property
    def n_nodes(self) -> int:
        return self.n_elem + 1

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def key(self) -> tuple:
        return (self.a, self.b, self.n_elem, self.tail_radius)


@dataclass(frozen=True)
class QuadratureRule:
    """Fixed quadrature parameters; part of the discrete problem definition."""

    gauss_order: int = 3
    diagonal_refinement: int = 6
    tail_mode: str = "analytic"

    def __post_init__(self):
        if self.gauss_order < 2:
            raise ValueError("gauss_order must be >= 2")
        if self.diagonal_refinement < 1:
            raise ValueError("diagonal_refinement must be >= 1")
        if self.tail_mode not in ("analytic", "graded-numeric"):
            raise ValueError(f"unknown tail mode {self.tail_mode!r}")


class GridFunction:
    """Piecewise-linear nodal function on a mesh, identically 0 outside (a, b).

    ``values`` holds the interior nodal values; both boundary nodes and the
    whole exterior are hard zeros, which encodes the volume constraint of the
    solution space.  Instances are treated as immutable during evaluation;
    solvers create new instances rather than mutating in place.
    """

    __slots__ = ("mesh", "values", "_full")

    def __init__(self, mesh: Mesh1D, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (mesh.n_elem - 1,):
            raise ValueError(
                f"expected {mesh.n_elem - 1} interior values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.mesh = mesh
        self.values = values.copy()
        self.values.setflags(write=False)
        full = np.zeros(mesh.n_nodes)
        full[1:-1] = self.values
        full.setflags(write=False)
        self._full = full

    @classmethod
    def zero(cls, mesh: Mesh1D) -> "GridFunction":
        return cls(mesh, np.zeros(mesh.n_elem - 1))

    @classmethod
    def from_callable(cls, mesh: Mesh1D, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(mesh, np.asarray(f(mesh.interior), dtype=np.float64))

    @property
    def full_values(self) -> np.ndarray:
        return self._full

    def __call__(self, x) -> np.ndarray:
        # np.interp clamps outside [a, b]; the boundary values are 0, so the
        # zero extension comes out right automatically.
        return np.interp(np.asarray(x, dtype=np.float64), self.mesh.nodes, self._full)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.mesh, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_mesh(other)
        return GridFunction(self.mesh, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_mesh(other)
        return GridFunction(self.mesh, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.mesh, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.mesh, -self.values)

    def _check_mesh(self, other: "GridFunction") -> None:
        if self.mesh.key() != other.mesh.key():
            raise ValueError("grid functions live on different meshes")

    def to_csv(self, path) -> None:
        """Write ``x,value`` rows for every node, boundary zeros included."""
        m = self.mesh
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# mesh a={float(m.a)!r} b={float(m.b)!r} n={m.n_elem}\n")
            fh.write("x,value\n")
            for x, v in zip(m.nodes, self._full):
                fh.write(f"{float(x)!r},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path, tail_radius: float | None = None) -> "GridFunction":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        header = None
        rows = []
        for ln in lines:
            if ln.startswith("#"):
                if ln.startswith("# mesh"):
                    header = ln
                continue
            if ln.lower().startswith("x,"):
                continue
            xs, vs = ln.split(",")
            rows.append((float(xs), float(vs)))
        if header is None:
            raise ValueError("missing '# mesh a=.. b=.. n=..' header")
        fields = dict(tok.split("=") for tok in header[1:].split() if "=" in tok)
        mesh = Mesh1D(float(fields["a"]), float(fields["b"]), int(fields["n"]),
                      tail_radius=tail_radius)
        vals = np.array([v for _, v in rows])
        if vals.size != mesh.n_nodes:
            raise ValueError("row count does not match the mesh header")
        if vals[0] != 0.0 or vals[-1] != 0.0:
            raise ValueError("boundary rows must carry zero values")
        return cls(mesh, vals[1:-1])


# ---------------------------------------------------------------------------
# quadrature tables


@dataclass(eq=False)
class SingleTable:
    """Per-element Gauss nodes on the interval itself."""

    x: np.ndarray
    w: np.ndarray
    i0: np.ndarray
    i1: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    n_nodes: int

    def values(self, full: np.ndarray) -> np.ndarray:
        return full[self.i0] * self.p0 + full[self.i1] * self.p1

    def scatter(self, coef: np.ndarray) -> np.ndarray:
        """Accumulate ``sum coef * e_k(x)`` into a nodal vector."""
        return det_scatter(self.n_nodes, [(self.i0, coef * self.p0),
                                          (self.i1, coef * self.p1)])


@dataclass(eq=False)
class PairTable:
    """Flattened list of quadrature point pairs for the double integrals.

    ``w`` is the purely geometric weight (product of the two 1D Gauss
    weights); the singular factor is supplied separately through
    ``weight_values`` and cached per weight kind.  Node ids and hat values
    of the owning elements are precomputed; exterior points carry zero hats
    pointing at node 0 so that evaluation needs no branches.
    """

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    ix0: np.ndarray
    ix1: np.ndarray
    px0: np.ndarray
    px1: np.ndarray
    iy0: np.ndarray
    iy1: np.ndarray
    py0: np.ndarray
    py1: np.ndarray
    n_nodes: int
    _wcache: dict = field(default_factory=dict, repr=False)

    def side_values(self, full: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ux = full[self.ix0] * self.px0 + full[self.ix1] * self.px1
        uy = full[self.iy0] * self.py0 + full[self.iy1] * self.py1
        return ux, uy

    def weight_values(self, key: tuple, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      keepalive=None) -> np.ndarray:
        hit = self._wcache.get(key)
        if hit is not None and (keepalive is None or hit[0] is keepalive):
            return hit[1]
        vals = self.w * fn(self.x, self.y)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("kernel weight produced non-finite values")
        self._wcache[key] = (keepalive, vals)
        return vals

    def pure_weights(self, s: float, p: float, dim: int = 1) -> np.ndarray:
        e = dim + s * p
        return self.weight_values(("pure", s, p, dim),
                                  lambda x, y: np.abs(x - y) ** -e)

    def kernel_weights(self, spec: KernelSpec) -> np.ndarray:
        return self.weight_values(("kern", id(spec)), spec.kernel, keepalive=spec)

    def scatter(self, coef: np.ndarray) -> np.ndarray:
        """Accumulate ``sum coef * (e_k(x) - e_k(y))`` into a nodal vector."""
        return det_scatter(self.n_nodes, [
            (self.ix0, coef * self.px0),
            (self.ix1, coef * self.px1),
            (self.iy0, -coef * self.py0),
            (self.iy1, -coef * self.py1),
        ])

    def bilinear(self, weights: np.ndarray) -> np.ndarray:
        """Dense matrix of ``sum w * (e_i(x)-e_i(y)) * (e_j(x)-e_j(y))``."""
        n = self.n_nodes
        ids = (self.ix0, self.ix1, self.iy0, self.iy1)
        hats = (self.px0, self.px1, -self.py0, -self.py1)
        flat = np.zeros(n * n)
        for ia, ha in zip(ids, hats):
            for ib, hb in zip(ids, hats):
                flat += np.bincount(ia * n + ib, weights=weights * ha * hb,
                                    minlength=n * n)
        return flat.reshape(n, n)


def _gauss_on(lo: np.ndarray, hi: np.ndarray, gx: np.ndarray, gw: np.ndarray):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[..., None] + half[..., None] * gx
    wts = half[..., None] * gw
    return pts, wts


def _graded_leaves(u: tuple, v: tuple, levels: int) -> list[tuple]:
    """Dyadic subdivision of a touching interval pair toward the contact set."""
    out = []

    def touching(a, b):
        return a[0] <= b[1] and b[0] <= a[1]

    def rec(a, b, lev):
        if lev == 0:
            out.append((a, b))
            return
        am = 0.5 * (a[0] + a[1])
        bm = 0.5 * (b[0] + b[1])
        for aa in ((a[0], am), (am, a[1])):
            for bb in ((b[0], bm), (bm, b[1])):
                if touching(aa, bb):
                    rec(aa, bb, lev - 1)
                else:
                    out.append((aa, bb))

    rec(u, v, levels)
    return out


def _exterior_intervals(mesh: Mesh1D) -> list[tuple[float, float]]:
    """Geometrically graded strip intervals hugging each boundary point."""
    h, r = mesh.h, mesh.tail_radius
    out = []
    # left of a: edges a - (2**k - 1) h while inside the strip
    edge = mesh.a
    size = h
    while mesh.a - edge < r:
        nxt = max(edge - size, mesh.a - r)
        out.append((nxt, edge))
        edge = nxt
        size *= 2.0
    edge = mesh.b
    size = h
    while edge - mesh.b < r:
        nxt = min(edge + size, mesh.b + r)
        out.append((edge, nxt))
        edge = nxt
        size *= 2.0
    return out


def build_pair_table(mesh: Mesh1D, rule: QuadratureRule) -> PairTable:
    g = rule.gauss_order
    gx, gw = np.polynomial.legendre.leggauss(g)
    gx1, gw1 = np.polynomial.legendre.leggauss(g + 1)
    nodes = mesh.nodes
    h = mesh.h
    n = mesh.n_elem

    elem_pts, elem_wts = _gauss_on(nodes[:-1], nodes[1:], gx, gw)  # (n, g)

    chunks_x, chunks_y, chunks_w, chunks_xo, chunks_yo = [], [], [], [], []

    def push(X, Y, W, xo, yo):
        chunks_x.append(X.ravel())
        chunks_y.append(Y.ravel())
        chunks_w.append(W.ravel())
        chunks_xo.append(xo.ravel())
        chunks_yo.append(yo.ravel())

    # separated interior pairs, fully vectorized
    E, F = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    sep = np.abs(E - F) >= 2
    Es, Fs = E[sep], F[sep]
    if Es.size:
        X = np.broadcast_to(elem_pts[Es][:, :, None], (Es.size, g, g))
        Y = np.broadcast_to(elem_pts[Fs][:, None, :], (Es.size, g, g))
        W = elem_wts[Es][:, :, None] * elem_wts[Fs][:, None, :]
        xo = np.broadcast_to(Es[:, None, None], X.shape)
        yo = np.broadcast_to(Fs[:, None, None], X.shape)
        push(X, Y, W, xo, yo)

    # touching pairs: graded leaves, batched by identical / non-identical
    ext = _exterior_intervals(mesh)
    intervals = [(nodes[e], nodes[e + 1], e) for e in range(n)]
    intervals += [(lo, hi, -1) for lo, hi in ext]

    leaves_plain = []   # (ulo, uhi, vlo, vhi, xo, yo)
    leaves_ident = []
    for alo, ahi, ao in intervals:
        for blo, bhi, bo in intervals:
            if ao < 0 and bo < 0:
                continue  # function and hats vanish on exterior x exterior
            if ao >= 0 and bo >= 0 and abs(ao - bo) >= 2:
                continue  # already covered by the vectorized block
            if not (alo <= bhi and blo <= ahi):
                # separated interior/exterior pair: single tensor block
                leaves_plain.append((alo, ahi, blo, bhi, ao, bo))
                continue
            for (ulo, uhi), (vlo, vhi) in _graded_leaves(
                    (alo, ahi), (blo, bhi), rule.diagonal_refinement):
                if ulo == vlo and uhi == vhi:
                    leaves_ident.append((ulo, uhi, vlo, vhi, ao, bo))
                else:
                    leaves_plain.append((ulo, uhi, vlo, vhi, ao, bo))

    def emit(leaves, nx_rule, ny_rule):
        if not leaves:
            return
        arr = np.array(leaves, dtype=np.float64)
        ulo, uhi, vlo, vhi = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
        xo = arr[:, 4].astype(np.int64)
        yo = arr[:, 5].astype(np.int64)
        xs, wxs = _gauss_on(ulo, uhi, *nx_rule)   # (B, gx)
        ys, wys = _gauss_on(vlo, vhi, *ny_rule)   # (B, gy)
        B, ngx = xs.shape
        ngy = ys.shape[1]
        X = np.broadcast_to(xs[:, :, None], (B, ngx, ngy))
        Y = np.broadcast_to(ys[:, None, :], (B, ngx, ngy))
        W = wxs[:, :, None] * wys[:, None, :]
        XO = np.broadcast_to(xo[:, None, None], X.shape)
        YO = np.broadcast_to(yo[:, None, None], X.shape)
        push(X, Y, W, XO, YO)

    emit(leaves_plain, (gx, gw), (gx, gw))
    # interlaced orders keep identical-interval points off the diagonal
    emit(leaves_ident, (gx, gw), (gx1, gw1))

    X = np.concatenate(chunks_x)
    Y = np.concatenate(chunks_y)
    W = np.concatenate(chunks_w)
    XO = np.concatenate(chunks_xo)
    YO = np.concatenate(chunks_yo)
    if np.any(X == Y):
        raise AssertionError("pair quadrature landed on the diagonal")

    def hat_data(pts, owners):
        inside = owners >= 0
        oc = np.where(inside, owners, 0)
        left = nodes[oc]
        p1 = np.where(inside, (pts - left) / h, 0.0)
        p0 = np.where(inside, 1.0 - (pts - left) / h, 0.0)
        i0 = np.where(inside, oc, 0)
        i1 = np.where(inside, oc + 1, 0)
        return i0.astype(np.intp), i1.astype(np.intp), p0, p1

    ix0, ix1, px0, px1 = hat_data(X, XO)
    iy0, iy1, py0, py1 = hat_data(Y, YO)
    return PairTable(x=X, y=Y, w=W, ix0=ix0, ix1=ix1, px0=px0, px1=px1,
                     iy0=iy0, iy1=iy1, py0=py0, py1=py1, n_nodes=mesh.n_nodes)


def build_single_table(mesh: Mesh1D, rule: QuadratureRule) -> SingleTable:
    g = rule.gauss_order
    gx, gw = np.polynomial.legendre.leggauss(g)
    pts, wts = _gauss_on(mesh.nodes[:-1], mesh.nodes[1:], gx, gw)
    owners = np.repeat(np.arange(mesh.n_elem), g)
    x = pts.ravel()
    p1 = (x - mesh.nodes[owners]) / mesh.h
    return SingleTable(x=x, w=wts.ravel(), i0=owners.astype(np.intp),
                       i1=(owners + 1).astype(np.intp), p0=1.0 - p1, p1=p1,
                       n_nodes=mesh.n_nodes)


_PAIR_CACHE: dict = {}
_SINGLE_CACHE: dict = {}
_NORM_CACHE: dict = {}
_MATRIX_CACHE: dict = {}
_CACHE_LIMIT = 12


def _cache_get(cache: dict, key, builder):
    if key not in cache:
        if len(cache) >= _CACHE_LIMIT:
            cache.pop(next(iter(cache)))
        cache[key] = builder()
    return cache[key]


def pair_table(mesh: Mesh1D, rule: QuadratureRule | None = None) -> PairTable:
    rule = rule or QuadratureRule()
    return _cache_get(_PAIR_CACHE, (mesh.key(), rule), lambda: build_pair_table(mesh, rule))


def single_table(mesh: Mesh1D, rule: QuadratureRule | None = None) -> SingleTable:
    rule = rule or QuadratureRule()
    return _cache_get(_SINGLE_CACHE, (mesh.key(), rule),
                      lambda: build_single_table(mesh, rule))


# ---------------------------------------------------------------------------
# tail bookkeeping


def tail_weight(mesh: Mesh1D, x: np.ndarray, s: float, p: float) -> np.ndarray:
    """Exact integral of |x-y|**-(1+s*p) over y beyond the exterior strip."""
    sp = s * p
    right = (mesh.b + mesh.tail_radius - x) ** -sp
    left = (x - (mesh.a - mesh.tail_radius)) ** -sp
    return (right + left) / sp


def _tail_allowed(kernel: KernelSpec, rule: QuadratureRule, weighted: bool) -> bool:
    """Whether the closed-form tail applies; raises on an impossible request."""
    if rule.tail_mode == "graded-numeric":
        return False
    if weighted and not kernel.is_standard:
        raise ConfigurationError(
            "analytic tail requested for a nonstandard kernel; "
            "use tail_mode='graded-numeric'"
        )
    return True


def tail_truncation_bound(u: GridFunction, kernel: KernelSpec, p: float | None = None,
                          rule: QuadratureRule | None = None) -> float:
    """Cap-scaled upper bound on the double-integral mass beyond the strip.

    For graded-numeric tails this is the reported error bar: the neglected
    contribution is at most ``lambda_cap`` times the standard-weight tail.
    """
    rule = rule or QuadratureRule()
    p = kernel.p if p is None else p
    st = single_table(u.mesh, rule)
    uq = st.values(u.full_values)
    om = tail_weight(u.mesh, st.x, kernel.s, p)
    return kernel.lambda_cap * 2.0 * det_sum(st.w * np.abs(uq) ** p * om)


# ---------------------------------------------------------------------------
# norms and pairings


def lq_norm(u: GridFunction, q: float, rule: QuadratureRule | None = None) -> float:
    """Lebesgue q-norm over the interval by the fixed per-element Gauss rule."""
    if not (math.isfinite(q) and q >= 1.0):
        raise ValueError("need a finite exponent q >= 1")
    st = single_table(u.mesh, rule or QuadratureRule())
    vals = st.values(u.full_values)
    return det_sum(st.w * np.abs(vals) ** q) ** (1.0 / q)


def duality_pairing(f, u: GridFunction, rule: QuadratureRule | None = None) -> float:
    """Integral of f*u over the interval; f is a grid function or callable."""
    st = single_table(u.mesh, rule or QuadratureRule())
    uv = st.values(u.full_values)
    fv = evaluate_source(f, u.mesh, st.x)
    return det_sum(st.w * fv * uv)


def evaluate_source(f, mesh: Mesh1D, x: np.ndarray) -> np.ndarray:
    """Evaluate a source term (grid function, callable, or None) at points."""
    if f is None:
        return np.zeros_like(x)
    if isinstance(f, GridFunction):
        if f.mesh.key() != mesh.key():
            raise ValueError("source grid function lives on a different mesh")
        return f(x)
    return np.asarray(f(x), dtype=np.float64)


def _seminorm_weights(u_mesh: Mesh1D, kernel: KernelSpec, p: float,
                      weighted: bool, rule: QuadratureRule):
    pt = pair_table(u_mesh, rule)
    if weighted:
        return pt, pt.kernel_weights(kernel)
    return pt, pt.pure_weights(kernel.s, p, kernel.dim)


def seminorm_matrix(mesh: Mesh1D, kernel: KernelSpec, p: float, weighted: bool,
                    rule: QuadratureRule) -> np.ndarray:
    """Dense nodal matrix of the p=2 double form, tail included when analytic.

    Only meaningful for exponent 2, where the form is bilinear; cached.
    """
    key = (mesh.key(), rule, kernel.s, p, weighted,
           id(kernel) if weighted else None)

    def build():
        pt, wvals = _seminorm_weights(mesh, kernel, p, weighted, rule)
        mat = pt.bilinear(wvals)
        if _tail_allowed(kernel, rule, weighted):
            st = single_table(mesh, rule)
            om = tail_weight(mesh, st.x, kernel.s, p)
            c = 2.0 * st.w * om
            nn = mesh.n_nodes
            flat = np.zeros(nn * nn)
            for ia, ha in ((st.i0, st.p0), (st.i1, st.p1)):
                for ib, hb in ((st.i0, st.p0), (st.i1, st.p1)):
                    flat += np.bincount(ia * nn + ib, weights=c * ha * hb,
                                        minlength=nn * nn)
            mat = mat + flat.reshape(nn, nn)
        return mat

    return _cache_get(_MATRIX_CACHE, key, build)


def gagliardo_seminorm(u: GridFunction, kernel: KernelSpec, p: float | None = None,
                       weighted: bool = False,
                       rule: QuadratureRule | None = None) -> float:
    """Fractional seminorm of order (s, p), pure or kernel-weighted.

    ``weighted=False`` uses the standard singular weight |x-y|**-(dim+s*p)
    (this is the solution-space norm used throughout); ``weighted=True``
    integrates against the kernel itself (the energy seminorm).
    """
    rule = rule or QuadratureRule()
    p = kernel.p if p is None else p
    if p == 2.0:
        mat = seminorm_matrix(u.mesh, kernel, p, weighted, rule)
        full = u.full_values
        return math.sqrt(max(float(full @ (mat @ full)), 0.0))
    pt, wvals = _seminorm_weights(u.mesh, kernel, p, weighted, rule)
    ux, uy = pt.side_values(u.full_values)
    total = det_sum(wvals * np.abs(ux - uy) ** p)
    if _tail_allowed(kernel, rule, weighted):
        st = single_table(u.mesh, rule)
        uq = st.values(u.full_values)
        om = tail_weight(u.mesh, st.x, kernel.s, p)
        total += 2.0 * det_sum(st.w * np.abs(uq) ** p * om)
    return total ** (1.0 / p)


def w0_norm(u: GridFunction, kernel: KernelSpec, p: float | None = None,
            rule: QuadratureRule | None = None) -> float:
    """Solution-space norm: the pure fractional seminorm."""
    return gagliardo_seminorm(u, kernel, p=p, weighted=False, rule=rule)


def sobolev_norm(u: GridFunction, kernel: KernelSpec,
                 rule: QuadratureRule | None = None) -> float:
    """Full-space norm (||u||_p^p + [u]^p)^(1/p) with the pure weight."""
    p = kernel.p
    lp = lq_norm(u, p, rule)
    sm = gagliardo_seminorm(u, kernel, p=p, weighted=False, rule=rule)
    return (lp ** p + sm ** p) ** (1.0 / p)


def basis_w0_norms(mesh: Mesh1D, kernel: KernelSpec, p: float | None = None,
                   rule: QuadratureRule | None = None) -> np.ndarray:
    """Pure seminorm of every interior hat function (cached)."""
    rule = rule or QuadratureRule()
    p = kernel.p if p is None else p
    key = (mesh.key(), rule, kernel.s, p)

    def build():
        if p == 2.0:
            mat = seminorm_matrix(mesh, kernel, p, False, rule)
            return np.sqrt(np.diag(mat)[1:-1])
        out = np.empty(mesh.n_elem - 1)
        for i in range(mesh.n_elem - 1):
            vals = np.zeros(mesh.n_elem - 1)
            vals[i] = 1.0
            out[i] = gagliardo_seminorm(GridFunction(mesh, vals), kernel, p=p,
                                        weighted=False, rule=rule)
        return out

    return _cache_get(_NORM_CACHE, key, build)


def mass_matrix(mesh: Mesh1D, rule: QuadratureRule | None = None) -> np.ndarray:
    """Nodal mass matrix with the same single-integral Gauss rule."""
    st = single_table(mesh, rule or QuadratureRule())
    nn = mesh.n_nodes
    flat = np.zeros(nn * nn)
    for ia, ha in ((st.i0, st.p0), (st.i1, st.p1)):
        for ib, hb in ((st.i0, st.p0), (st.i1, st.p1)):
            flat += np.bincount(ia * nn + ib, weights=st.w * ha * hb,
                                minlength=nn * nn)
    return flat.reshape(nn, nn)


def poincare_constant(mesh: Mesh1D, kernel: KernelSpec, p: float | None = None,
                      rule: QuadratureRule | None = None,
                      profiles: Iterable[GridFunction] = ()) -> float:
    """Discrete constant C with ||u||_p <= C [u]_{s,p} on this mesh.

    For p = 2 this is exact (largest generalized eigenvalue of the mass
    matrix against the seminorm matrix).  For other exponents it is the
    empirical maximum of the ratio over the supplied profiles, reported as
    an estimate.
    """
    rule = rule or QuadratureRule()
    p = kernel.p if p is None else p
    if p == 2.0:
        a_mat = seminorm_matrix(mesh, kernel, 2.0, False, rule)[1:-1, 1:-1]
        m_mat = mass_matrix(mesh, rule)[1:-1, 1:-1]
        chol = np.linalg.cholesky(a_mat)
        inv = np.linalg.inv(chol)
        sym = inv @ m_mat @ inv.T
        return math.sqrt(float(np.linalg.eigvalsh(sym)[-1]))
    best = 0.0
    for u in profiles:
        sn = gagliardo_seminorm(u, kernel, p=p, weighted=False, rule=rule)
        if sn > 0:
            best = max(best, lq_norm(u, p, rule) / sn)
    if best == 0.0:
        raise ValueError("empirical constant needs at least one nonzero profile")
    return best
