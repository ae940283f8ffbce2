"""Small conic modeling layer.

Decision vectors are real. Every constraint is stored as cone membership of
an affine map of ``x``::

    nonneg:  s = expr(x) >= 0          (linear  a^T x <= b  becomes  b - a^T x)
    soc:     s = [t(x); y(x)] in Q     (||y(x)||_2 <= t(x))
    psd:     S = F0 + sum_i x_i F_i  >= 0 in the semidefinite order

Affine maps keep their coefficients as sparse matrices whose column count is
a fixed large capacity, so variables can be appended while a program is being
assembled. Complex coefficients are allowed in intermediate expressions (for
Hermitian quadratic forms); anything handed to a cone must be real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

# Column capacity for coefficient matrices; sliced down to n_vars on export.
CAP = 1 << 17


def _empty(m, dtype=float):
    return sp.csr_matrix((m, CAP), dtype=dtype)


class Affine:
    """Vector-valued affine function ``coef @ x + const``."""

    __array_priority__ = 100

    def __init__(self, coef, const):
        self.coef = sp.csr_matrix(coef)
        self.const = np.atleast_1d(np.asarray(const))
        if self.coef.shape[0] != self.const.shape[0]:
            raise ValueError("coefficient/constant size mismatch")

    # -- construction ---------------------------------------------------
    @classmethod
    def constant(cls, values) -> "Affine":
        values = np.atleast_1d(np.asarray(values))
        return cls(_empty(values.size, values.dtype), values.ravel())

    @classmethod
    def zeros(cls, m: int) -> "Affine":
        return cls.constant(np.zeros(m))

    @property
    def size(self) -> int:
        return self.const.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.const) or np.iscomplexobj(self.coef.data)

    # -- arithmetic -----------------------------------------------------
    @staticmethod
    def _lift(other, size):
        if isinstance(other, Affine):
            return other
        arr = np.asarray(other)
        if arr.ndim == 0:
            arr = np.full(size, arr[()])
        return Affine.constant(arr)

    def __add__(self, other):
        other = self._lift(other, self.size)
        if other.size != self.size:
            raise ValueError(f"size mismatch {self.size} vs {other.size}")
        return Affine(self.coef + other.coef, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.coef, -self.const)

    def __sub__(self, other):
        return self + (-self._lift(other, self.size))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, Affine):
            raise TypeError("products of affine expressions are not affine")
        scalar = np.asarray(scalar)
        if scalar.ndim == 0:
            return Affine(self.coef * scalar[()], self.const * scalar[()])
        # elementwise scaling by a constant vector
        return Affine(sp.diags(scalar) @ self.coef, scalar * self.const)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __rmatmul__(self, mat):
        if sp.issparse(mat):
            mat = sp.csr_matrix(mat)
            return Affine(mat @ self.coef, mat @ self.const)
        mat = np.asarray(mat)
        if mat.ndim == 1:
            mat = mat.reshape(1, -1)
        return Affine(sp.csr_matrix(mat) @ self.coef, mat @ self.const)

    def dot(self, vec) -> "Affine":
        """Scalar ``vec^T expr`` (no conjugation)."""
        return np.asarray(vec).reshape(1, -1) @ self

    def sum(self) -> "Affine":
        return np.ones((1, self.size)) @ self

    def __getitem__(self, idx):
        rows = np.arange(self.size)[idx]
        rows = np.atleast_1d(rows)
        return Affine(self.coef[rows], self.const[rows])

    @property
    def real(self):
        return Affine(self.coef.real, self.const.real)

    @property
    def imag(self):
        return Affine(self.coef.imag, self.const.imag)

    def conj(self):
        return Affine(self.coef.conj(), self.const.conj())

    def value(self, x):
        x = np.asarray(x)
        return self.coef[:, : x.size] @ x + self.const

    def __repr__(self):
        return f"Affine(size={self.size}, nnz={self.coef.nnz})"


def vstack(items: Sequence) -> Affine:
    parts = [it if isinstance(it, Affine) else Affine.constant(it) for it in items]
    return Affine(sp.vstack([p.coef for p in parts], format="csr"),
                  np.concatenate([p.const for p in parts]))


def _selection(targets, n_rows, n_src):
    return sp.csr_matrix((np.ones(len(targets)), (targets, np.arange(n_src))),
                         shape=(n_rows, n_src))


class MatAffine:
    """Matrix-valued affine map; entries kept row-major in an ``Affine``."""

    __array_priority__ = 100

    def __init__(self, shape, vec: Affine):
        self.shape = tuple(shape)
        if vec.size != self.shape[0] * self.shape[1]:
            raise ValueError("shape does not match vectorised size")
        self.vec = vec

    @classmethod
    def constant(cls, mat) -> "MatAffine":
        mat = np.atleast_2d(np.asarray(mat))
        return cls(mat.shape, Affine.constant(mat.ravel()))

    @classmethod
    def from_scalar(cls, s: Affine, mat) -> "MatAffine":
        """The matrix ``s * mat`` for a scalar affine ``s``."""
        mat = np.atleast_2d(np.asarray(mat))
        v = mat.ravel().reshape(-1, 1)
        return cls(mat.shape, Affine(sp.csr_matrix(v) @ s.coef, v[:, 0] * s.const[0]))

    @classmethod
    def diag(cls, v: Affine) -> "MatAffine":
        d = v.size
        sel = _selection(np.arange(d) * (d + 1), d * d, d)
        return cls((d, d), sel @ v)

    @classmethod
    def column(cls, v: Affine) -> "MatAffine":
        return cls((v.size, 1), v)

    @property
    def is_complex(self):
        return self.vec.is_complex

    def _coerce(self, other):
        if isinstance(other, MatAffine):
            return other
        other = np.asarray(other)
        if other.ndim == 0:
            other = np.full(self.shape, other[()])
        return MatAffine.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return MatAffine(self.shape, self.vec + other.vec)

    __radd__ = __add__

    def __neg__(self):
        return MatAffine(self.shape, -self.vec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        return MatAffine(self.shape, self.vec * scalar)

    __rmul__ = __mul__

    def lmul(self, a) -> "MatAffine":
        """Constant left product ``A @ X``."""
        a = np.atleast_2d(np.asarray(a))
        c = self.shape[1]
        k = sp.kron(sp.csr_matrix(a), sp.eye(c), format="csr")
        return MatAffine((a.shape[0], c), Affine(k @ self.vec.coef, k @ self.vec.const))

    def rmul(self, b) -> "MatAffine":
        """Constant right product ``X @ B``."""
        b = np.atleast_2d(np.asarray(b))
        r, c = self.shape
        k = sp.kron(sp.eye(r), sp.csr_matrix(b.T), format="csr")
        return MatAffine((r, b.shape[1]), Affine(k @ self.vec.coef, k @ self.vec.const))

    def congruence(self, a) -> "MatAffine":
        """``A X A^H`` for constant ``A``."""
        a = np.atleast_2d(np.asarray(a))
        return self.lmul(a).rmul(a.conj().T)

    @property
    def T(self) -> "MatAffine":
        r, c = self.shape
        src = (np.arange(r)[None, :] * c + np.arange(c)[:, None]).ravel()
        return MatAffine((c, r), self.vec[src])

    def conj(self):
        return MatAffine(self.shape, self.vec.conj())

    @property
    def H(self):
        return self.T.conj()

    @property
    def real(self):
        return MatAffine(self.shape, self.vec.real)

    @property
    def imag(self):
        return MatAffine(self.shape, self.vec.imag)

    def matvec(self, g) -> Affine:
        """``X @ g`` for a constant vector."""
        return self.rmul(np.asarray(g).reshape(-1, 1)).vec

    def quad(self, g) -> Affine:
        """Scalar ``g^H X g`` for a constant vector ``g``."""
        g = np.asarray(g).ravel()
        return np.outer(g.conj(), g).ravel().reshape(1, -1) @ self.vec

    def inner(self, q) -> Affine:
        """``sum_ab Q_ab X_ab``; equals Tr(Q X) for symmetric Q."""
        return np.asarray(q).ravel().reshape(1, -1) @ self.vec

    def trace(self) -> Affine:
        return self.inner(np.eye(self.shape[0]))

    def value(self, x):
        return self.vec.value(x).reshape(self.shape)

    def embed_hermitian(self) -> "MatAffine":
        """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian map."""
        re, im = self.real, self.imag
        return bmat([[re, -im], [im, re]])


def bmat(blocks: Sequence[Sequence]) -> MatAffine:
    """Assemble a block matrix of MatAffine / constants / None (zeros)."""
    nr, nc = len(blocks), len(blocks[0])
    heights = [None] * nr
    widths = [None] * nc
    for a, row in enumerate(blocks):
        for b, blk in enumerate(row):
            if blk is None:
                continue
            shp = blk.shape if isinstance(blk, MatAffine) else np.atleast_2d(blk).shape
            heights[a] = heights[a] or shp[0]
            widths[b] = widths[b] or shp[1]
            if heights[a] != shp[0] or widths[b] != shp[1]:
                raise ValueError("inconsistent block sizes")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise ValueError("every block row and column needs one sized block")
    r0 = np.concatenate([[0], np.cumsum(heights)])
    c0 = np.concatenate([[0], np.cumsum(widths)])
    R, C = int(r0[-1]), int(c0[-1])
    total = Affine.zeros(R * C)
    for a, row in enumerate(blocks):
        for b, blk in enumerate(row):
            if blk is None:
                continue
            if not isinstance(blk, MatAffine):
                blk = MatAffine.constant(blk)
            h, w = blk.shape
            tgt = ((r0[a] + np.arange(h))[:, None] * C + (c0[b] + np.arange(w))[None, :]).ravel()
            total = total + _selection(tgt, R * C, h * w) @ blk.vec
    return MatAffine((R, C), total)


# ---------------------------------------------------------------------------
# constraints and programs


@dataclass
class LinearConstraint:
    """``expr(x) >= 0`` elementwise."""

    expr: Affine
    tag: tuple = ()

    kind = "nonneg"

    @property
    def dim(self):
        return self.expr.size

    def margin(self, x) -> float:
        return float(np.min(self.expr.value(x)))


@dataclass
class SocConstraint:
    """``||y(x)||_2 <= t(x)``; ``expr`` stacks ``[t; y]``."""

    expr: Affine
    tag: tuple = ()

    kind = "soc"

    @property
    def dim(self):
        return self.expr.size

    def margin(self, x) -> float:
        v = self.expr.value(x)
        return float(v[0] - np.linalg.norm(v[1:]))


@dataclass
class PsdConstraint:
    """Affine symmetric matrix constrained to the PSD cone."""

    mat: MatAffine
    tag: tuple = ()

    kind = "psd"

    @property
    def dim(self):
        return self.mat.shape[0]

    def margin(self, x) -> float:
        return float(np.linalg.eigvalsh(self.mat.value(x))[0])


@dataclass
class VarInfo:
    start: int
    stop: int
    kind: str = "vector"
    shape: tuple = ()


@dataclass
class ConicProgram:
    """Minimise ``objective(x)`` subject to a list of conic constraints."""

    name: str = ""
    n_vars: int = 0
    variables: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: Affine = field(default_factory=lambda: Affine.zeros(1))
    metadata: dict = field(default_factory=dict)

    # -- variables ------------------------------------------------------
    def _reserve(self, name, size, kind, shape):
        if name in self.variables:
            raise ValueError(f"duplicate variable name {name!r}")
        start = self.n_vars
        self.n_vars += size
        if self.n_vars > CAP:
            raise ValueError("variable capacity exceeded")
        self.variables[name] = VarInfo(start, self.n_vars, kind, shape)
        return start

    def variable(self, name: str, size: int = 1) -> Affine:
        start = self._reserve(name, size, "vector", (size,))
        coef = sp.csr_matrix((np.ones(size), (np.arange(size), start + np.arange(size))),
                             shape=(size, CAP))
        return Affine(coef, np.zeros(size))

    def symmetric(self, name: str, d: int) -> MatAffine:
        """Real symmetric d x d matrix variable (lower triangle stored)."""
        ii, jj = np.tril_indices(d)
        start = self._reserve(name, ii.size, "symmetric", (d, d))
        var = start + np.arange(ii.size)
        rows = np.concatenate([ii * d + jj, (jj * d + ii)[ii != jj]])
        cols = np.concatenate([var, var[ii != jj]])
        coef = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(d * d, CAP))
        return MatAffine((d, d), Affine(coef, np.zeros(d * d)))

    def hermitian(self, name: str, d: int) -> MatAffine:
        """Complex Hermitian d x d matrix variable, W = A + jB."""
        ii, jj = np.tril_indices(d)
        off = ii != jj
        n_a, n_b = ii.size, int(off.sum())
        start = self._reserve(name, n_a + n_b, "hermitian", (d, d))
        va = start + np.arange(n_a)
        vb = start + n_a + np.arange(n_b)
        io, jo = ii[off], jj[off]
        rows = np.concatenate([ii * d + jj, jo * d + io, io * d + jo, jo * d + io])
        cols = np.concatenate([va, va[off], vb, vb])
        vals = np.concatenate([np.ones(n_a), np.ones(n_b), 1j * np.ones(n_b), -1j * np.ones(n_b)])
        coef = sp.csr_matrix((vals, (rows, cols)), shape=(d * d, CAP))
        return MatAffine((d, d), Affine(coef, np.zeros(d * d, dtype=complex)))

    def slice(self, name: str) -> slice:
        info = self.variables[name]
        return slice(info.start, info.stop)

    def read(self, name: str, x) -> np.ndarray:
        """Value of a registered variable, reshaped to matrix form if needed."""
        info = self.variables[name]
        raw = np.asarray(x)[info.start:info.stop]
        if info.kind == "vector":
            return raw
        d = info.shape[0]
        ii, jj = np.tril_indices(d)
        if info.kind == "symmetric":
            m = np.zeros((d, d))
            m[ii, jj] = raw
            m[jj, ii] = raw
            return m
        off = ii != jj
        a = np.zeros((d, d))
        a[ii, jj] = raw[: ii.size]
        a[jj, ii] = raw[: ii.size]
        b = np.zeros((d, d))
        b[ii[off], jj[off]] = raw[ii.size:]
        b[jj[off], ii[off]] = -raw[ii.size:]
        return a + 1j * b

    # -- constraints ----------------------------------------------------
    def _check_real(self, expr):
        if expr.is_complex:
            imag = np.abs(expr.imag.coef).max() if expr.coef.nnz else 0.0
            imag = max(imag, np.abs(expr.const.imag).max())
            if imag > 1e-9 * max(1.0, np.abs(expr.coef).max() if expr.coef.nnz else 1.0):
                raise ValueError("complex data reached a real cone")
            expr = expr.real
        return expr

    def add_nonneg(self, expr: Affine, tag=()) -> int:
        self.constraints.append(LinearConstraint(self._check_real(expr), tuple(tag)))
        return len(self.constraints) - 1

    def add_linear(self, lhs: Affine, rhs=0.0, tag=()) -> int:
        """``lhs <= rhs``."""
        return self.add_nonneg(rhs - lhs, tag)

    def add_soc(self, t: Affine, y: Affine, tag=()) -> int:
        expr = self._check_real(vstack([t, y]))
        self.constraints.append(SocConstraint(expr, tuple(tag)))
        return len(self.constraints) - 1

    def add_psd(self, mat: MatAffine, tag=()) -> int:
        if mat.shape[0] != mat.shape[1]:
            raise ValueError("PSD block must be square")
        if mat.is_complex:
            mat = mat.embed_hermitian()
        vec = self._check_real(mat.vec)
        mat = MatAffine(mat.shape, vec)
        mt = mat.T
        asym = max(abs(mat.vec.coef - mt.vec.coef).max() if mat.vec.coef.nnz else 0.0,
                   np.abs(mat.vec.const - mt.vec.const).max())
        scale = max(1.0, abs(mat.vec.coef).max() if mat.vec.coef.nnz else 0.0,
                    np.abs(mat.vec.const).max())
        if asym > 1e-9 * scale:
            raise ValueError(f"PSD block is not symmetric (asymmetry {asym:.3g})")
        mat = (mat + mt) * 0.5
        self.constraints.append(PsdConstraint(mat, tuple(tag)))
        return len(self.constraints) - 1

    def minimize(self, expr: Affine):
        if expr.size != 1:
            raise ValueError("objective must be scalar")
        self.objective = self._check_real(expr)

    # -- export ---------------------------------------------------------
    def objective_vector(self) -> np.ndarray:
        return self.objective.coef[:, : self.n_vars].toarray().ravel()

    def count(self, kind: str | None = None, label: str | None = None) -> int:
        return sum(1 for c in self.constraints
                   if (kind is None or c.kind == kind)
                   and (label is None or (c.tag and c.tag[0] == label)))

    def blocks(self, label: str):
        return [c for c in self.constraints if c.tag and c.tag[0] == label]


# ---------------------------------------------------------------------------
# constraint transformers


@dataclass
class ChanceConstraintData:
    """Gaussian linear chance constraint ``Pr{a^T x <= rhs} >= eta``.

    ``a`` has mean ``mean`` and diagonal covariance ``cov_sqrt**2``. For a
    general covariance ``cov_sqrt`` may instead be the affine expression
    ``C^{1/2} x`` itself. ``rhs`` may be an affine expression (the partial
    schemes put a variable in it).
    """

    mean: np.ndarray
    cov_sqrt: np.ndarray
    eta: float
    rhs: object


def add_chance_soc(p: ConicProgram, d: ChanceConstraintData, x: Affine, tag=(),
                   form: str = "soc") -> int:
    """Append ``mean^T x + q(eta) ||C^{1/2} x|| <= rhs`` as one cone.

    ``form="lmi"`` emits the equivalent Schur-complement block instead.
    """
    from .robust_bounds import normal_quantile

    if not 0.5 < d.eta < 1.0:
        raise ValueError(f"chance threshold eta={d.eta} must lie in (0.5, 1)")
    q = normal_quantile(d.eta)
    slack = d.rhs - x.dot(np.asarray(d.mean, dtype=float))
    if isinstance(d.cov_sqrt, Affine):
        spread = d.cov_sqrt
        if spread.coef.count_nonzero() == 0 and not np.any(spread.const):
            return p.add_nonneg(slack, tag)
    else:
        cov = np.broadcast_to(np.asarray(d.cov_sqrt, dtype=float), (x.size,))
        if not np.any(cov):
            return p.add_nonneg(slack, tag)
        spread = x * cov
    if form == "soc":
        return p.add_soc(slack / q, spread, tag)
    if form == "lmi":
        return p.add_psd(soc_to_lmi(SocConstraint(vstack([slack / q, spread]))), tag)
    raise ValueError(f"unknown chance constraint form {form!r}")


def soc_to_lmi(soc: SocConstraint) -> MatAffine:
    """Schur-complement block [[t I, y], [y^T, t]] of ``||y|| <= t``."""
    t = soc.expr[0]
    y = soc.expr[1:]
    m = y.size
    return bmat([[MatAffine.from_scalar(t, np.eye(m)), MatAffine.column(y)],
                 [MatAffine.column(y).T, MatAffine.from_scalar(t, np.eye(1))]])


def _as_mat(a, shape):
    if isinstance(a, MatAffine):
        return a
    if isinstance(a, Affine):
        return MatAffine(shape, a)
    a = np.asarray(a)
    if a.ndim == 1 and a.size == shape[0] and shape[1] == 1:
        a = a.reshape(shape)
    return MatAffine.constant(np.broadcast_to(a, shape))


def s_procedure_lmi(p: ConicProgram, a1, b1, c1, a2, b2, c2, multiplier_name: str,
                    tag=()) -> int:
    """Certificate of ``f1(x) <= 0  =>  f2(x) <= 0`` for quadratics.

    ``f_m(x) = x^H A_m x + 2 Re(b_m^H x) + c_m``. The premise data must be
    constant; the consequent may be affine in the decision variables. Adds a
    multiplier ``lam >= 0`` and the block
    ``lam [[A1, b1], [b1^H, c1]] - [[A2, b2], [b2^H, c2]] >= 0``.
    """
    a1 = np.atleast_2d(np.asarray(a1))
    n = a1.shape[0]
    b1 = np.asarray(b1).reshape(n, 1)
    a2m = _as_mat(a2, (n, n))
    b2m = _as_mat(b2, (n, 1))
    c2m = _as_mat(c2, (1, 1))
    if a2m.shape != (n, n) or b2m.shape != (n, 1):
        raise ValueError("S-procedure premise/consequent dimension mismatch")
    lam = p.variable(multiplier_name, 1)
    p.add_nonneg(lam, tag + ("multiplier",) if tag else ("multiplier",))
    premise = np.block([[a1, b1], [b1.conj().T, np.atleast_2d(c1)]])
    block = MatAffine.from_scalar(lam, premise) - bmat([[a2m, b2m], [b2m.H, c2m]])
    return p.add_psd(block, tag)


def lift_rank_one(p: ConicProgram, w: Affine, name: str) -> MatAffine:
    """Symmetric ``W`` with [[W, w], [w^T, 1]] >= 0, i.e. W >= w w^T."""
    W = p.symmetric(name, w.size)
    col = MatAffine.column(w)
    p.add_psd(bmat([[W, col], [col.T, np.eye(1)]]), ("lift", name))
    p.metadata.setdefault("lift_mats", {})[name] = W
    return W


# ---------------------------------------------------------------------------
# sparse-text dump
#
#   conic-program v1
#   name <name>
#   n_vars <n>
#   var <name> <start> <stop> <kind> <d0> [<d1>]
#   objective <nnz> <const>
#   <col> <value>                       (nnz lines)
#   constraint <kind> <rows> <nnz> [<tag items>...]
#   const <v_0> ... <v_{rows-1}>
#   <row> <col> <value>                 (nnz lines)
#   end
#
# psd records store the full row-major d x d matrix (rows = d*d).


def _fmt(v: float) -> str:
    return repr(float(v))


def _coo(m):
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    m.sort_indices()
    return m.tocoo()


def dump_program(p: ConicProgram, path=None) -> str:
    n = p.n_vars
    out = ["conic-program v1", f"name {p.name or '-'}", f"n_vars {n}"]
    for name, info in p.variables.items():
        out.append(f"var {name} {info.start} {info.stop} {info.kind} "
                   + " ".join(str(s) for s in info.shape))
    obj = _coo(p.objective.coef[:, :n])
    out.append(f"objective {obj.nnz} {_fmt(p.objective.const[0].real)}")
    out += [f"{c} {_fmt(v)}" for c, v in zip(obj.col, obj.data.real)]
    for con in p.constraints:
        expr = con.mat.vec if con.kind == "psd" else con.expr
        coo = _coo(expr.coef[:, :n])
        tag = " ".join(str(t).replace(" ", "_") for t in con.tag)
        out.append(f"constraint {con.kind} {expr.size} {coo.nnz} {tag}".rstrip())
        out.append("const " + " ".join(_fmt(v) for v in expr.const.real))
        out += [f"{r} {c} {_fmt(v)}" for r, c, v in zip(coo.row, coo.col, coo.data.real)]
    out.append("end")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_program(text: str) -> ConicProgram:
    """Inverse of :func:`dump_program` (accepts text or a file path)."""
    if "\n" not in text:
        with open(text) as fh:
            text = fh.read()
    lines = iter(text.splitlines())
    if next(lines).strip() != "conic-program v1":
        raise ValueError("not a conic-program v1 dump")
    name = next(lines).split(maxsplit=1)[1]
    n = int(next(lines).split()[1])
    p = ConicProgram(name="" if name == "-" else name)
    p.n_vars = n
    line = next(lines)
    while line.startswith("var "):
        f = line.split()
        p.variables[f[1]] = VarInfo(int(f[2]), int(f[3]), f[4], tuple(int(v) for v in f[5:]))
        line = next(lines)
    f = line.split()
    nnz, const = int(f[1]), float(f[2])
    cols, vals = [], []
    for _ in range(nnz):
        c, v = next(lines).split()
        cols.append(int(c))
        vals.append(float(v))
    p.objective = Affine(sp.csr_matrix((vals, ([0] * nnz, cols)), shape=(1, CAP)), [const])
    for line in lines:
        if line == "end":
            break
        f = line.split()
        kind, m, nnz, tag = f[1], int(f[2]), int(f[3]), tuple(f[4:])
        const = np.array([float(v) for v in next(lines).split()[1:]])
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            r, c, v = next(lines).split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
        expr = Affine(sp.csr_matrix((vals, (rows, cols)), shape=(m, CAP)), const)
        if kind == "nonneg":
            p.constraints.append(LinearConstraint(expr, tag))
        elif kind == "soc":
            p.constraints.append(SocConstraint(expr, tag))
        elif kind == "psd":
            d = int(round(np.sqrt(m)))
            p.constraints.append(PsdConstraint(MatAffine((d, d), expr), tag))
        else:
            raise ValueError(f"unknown constraint kind {kind!r}")
    return p
