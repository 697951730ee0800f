"""Point-dependent fields, the canonical symplectic form, and bracket/rank primitives.

Coordinates on phase space are ordered ``x = (q1..qn, p1..pn)``. The
symplectic form is omega = sum dp_i ^ dq_i, represented by

    Omega = [[0, -I], [I, 0]],    P = Omega^{-1} = [[0, I], [-I, 0]],

so that the Hamiltonian vector field P dH reads (dH/dp, -dH/dq) and
{F, G} = <dF, P dG> = sum_k (dF/dq_k dG/dp_k - dF/dp_k dG/dq_k).

Fields live on a base of dimension ``dim``: either phase space (2n) or
configuration space (n). Every field exposes ``jet(x)``, returning the
value at ``x`` together with exact first derivatives.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .dual import Dual, Jet
from .errors import DimensionError
from .expression import Expression, as_expression


class SymplecticForm:
    def __init__(self, n: int):
        self.n = n
        eye, zero = np.eye(n), np.zeros((n, n))
        self.omega = np.block([[zero, -eye], [eye, zero]])
        self.poisson = np.block([[zero, eye], [-eye, zero]])

    @property
    def dim(self) -> int:
        return 2 * self.n

    def hamiltonian_vector(self, dH: np.ndarray) -> np.ndarray:
        return self.poisson @ dH


class Field:
    """A field of arrays of fixed ``shape`` over a base space of dimension ``dim``."""

    shape: tuple = ()

    def __init__(self, dim: int, jet_fn: Callable[[np.ndarray], Jet], name: str = ""):
        self.dim = dim
        self._jet_fn = jet_fn
        self.name = name

    def __repr__(self):
        return f"{type(self).__name__}({self.name or '?'}, dim={self.dim})"

    def jet(self, x) -> Jet:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"{self!r} evaluated at a point of shape {x.shape}")
        return self._jet_fn(x)

    def __call__(self, x) -> np.ndarray:
        return self.jet(x).value

    @classmethod
    def _from_expression_array(cls, entries, n, params, space, name, shape):
        exprs = np.empty(shape, dtype=object)
        flat = np.array(entries, dtype=object).reshape(shape) if shape else np.array(entries, dtype=object)
        for idx in np.ndindex(*shape):
            exprs[idx] = as_expression(flat[idx], n, params)
        dim = _space_dim(space, n)
        if space == "config":
            for idx in np.ndindex(*shape):
                if not exprs[idx].is_configuration:
                    raise DimensionError(f"entry {idx} of a configuration-space field depends on momenta")
        constant = {idx: (not exprs[idx].variables()) for idx in np.ndindex(*shape)}

        def jet_fn(x):
            value = np.zeros(shape)
            deriv = np.zeros(shape + (dim,))
            for idx in np.ndindex(*shape):
                if constant[idx]:
                    value[idx] = exprs[idx].evaluate(np.zeros(dim))
                else:
                    d = exprs[idx].eval_dual(x)
                    value[idx] = d.value
                    deriv[idx] = d.grad
            return Jet(value, deriv)

        f = cls(dim, jet_fn, name)
        f.expressions = exprs
        return f


def _space_dim(space: str, n: int) -> int:
    if space == "phase":
        return 2 * n
    if space == "config":
        return n
    raise ValueError(f"space must be 'phase' or 'config', not {space!r}")


class ScalarField(Field):
    shape = ()

    @classmethod
    def from_expression(cls, e, n: int | None = None, params=None, space: str = "phase", name: str = ""):
        if isinstance(e, Expression):
            n = e.n
        field = cls._from_expression_array([e], n, params, space, name or str(e), (1,))

        def jet_fn(x, _inner=field._jet_fn):
            j = _inner(x)
            return Jet(j.value[0], j.deriv[0])

        return cls(field.dim, jet_fn, field.name)

    @classmethod
    def from_dual_function(cls, fn: Callable[[np.ndarray], Dual], dim: int, name: str = ""):
        def jet_fn(x):
            d = fn(x)
            return Jet(d.value, d.grad)

        return cls(dim, jet_fn, name)

    def eval_dual(self, x) -> Dual:
        j = self.jet(x)
        return Dual(float(j.value), j.deriv)


class VectorField(Field):
    @property
    def shape(self):
        return (self.dim,)

    @classmethod
    def from_expressions(cls, components: Sequence, n: int, params=None, space: str = "phase", name: str = ""):
        dim = _space_dim(space, n)
        if len(components) != dim:
            raise DimensionError(f"{len(components)} components for a base of dimension {dim}")
        return cls._from_expression_array(list(components), n, params, space, name, (dim,))

    @classmethod
    def constant(cls, vector, name: str = ""):
        v = np.asarray(vector, dtype=float)
        return cls(v.shape[0], lambda x: Jet.constant(v, v.shape[0]), name)


class CovectorField(VectorField):
    @classmethod
    def differential(cls, F, dim: int | None = None, name: str = ""):
        """The exact 1-form dF of a scalar field (Expression, ScalarField or Dual-valued callable)."""
        if dim is None:
            dim = getattr(F, "dim", None) or 2 * F.n

        def jet_fn(x):
            g = differential(F, x)
            # second derivatives are not tracked for differentials
            return Jet(g, np.full((dim, dim), np.nan))

        return cls(dim, jet_fn, name or f"d({getattr(F, 'name', F)})")


class OperatorField(Field):
    """A (1,1) tensor field: at each point a square matrix L[i, j] = L^i_j."""

    @property
    def shape(self):
        return (self.dim, self.dim)

    @classmethod
    def from_expressions(cls, entries: Sequence[Sequence], n: int, params=None, space: str = "phase", name: str = ""):
        dim = _space_dim(space, n)
        if len(entries) != dim or any(len(row) != dim for row in entries):
            raise DimensionError(f"operator entries must be {dim}x{dim}")
        return cls._from_expression_array([list(r) for r in entries], n, params, space, name, (dim, dim))

    @classmethod
    def constant(cls, matrix, name: str = ""):
        mat = np.asarray(matrix, dtype=float)
        m = mat.shape[0]
        return cls(m, lambda x: Jet.constant(mat, m), name)

    @classmethod
    def identity(cls, dim: int, name: str = "I"):
        return cls.constant(np.eye(dim), name)


# Symmetric contravariant 2-tensors and (1,1) fields share the matrix representation.
MatrixField = OperatorField


def dual_of(F, x) -> Dual:
    """Evaluate a scalar field with its gradient. Accepts Expression, ScalarField or callable."""
    if hasattr(F, "eval_dual"):
        return F.eval_dual(x)
    d = F(x)
    if not isinstance(d, Dual):
        raise TypeError("scalar field callables must return a Dual")
    return d


def differential(F, x) -> np.ndarray:
    return dual_of(F, x).grad


def lie_bracket(X: Field, Y: Field, x) -> np.ndarray:
    """[X, Y]^i = X^a d_a Y^i - Y^a d_a X^i at ``x``."""
    if X.dim != Y.dim:
        raise DimensionError(f"vector fields of dimension {X.dim} and {Y.dim}")
    jx, jy = X.jet(x), Y.jet(x)
    return jy.deriv @ jx.value - jx.deriv @ jy.value


def bracket_of_gradients(dF: np.ndarray, dG: np.ndarray) -> float:
    n = dF.shape[0] // 2
    return float(dF[:n] @ dG[n:] - dF[n:] @ dG[:n])


def poisson_bracket(F, G, x, omega: SymplecticForm | None = None) -> float:
    """{F, G} = <dF, P dG> with the canonical Poisson operator."""
    dF, dG = differential(F, x), differential(G, x)
    if dF.shape != dG.shape or dF.shape[0] % 2:
        raise DimensionError("Poisson bracket needs gradients on the same phase space")
    omega = omega or SymplecticForm(dF.shape[0] // 2)
    return float(dF @ (omega.poisson @ dG))


def separable_involution_terms(F, G, x) -> np.ndarray:
    """Per-coordinate terms dF/dq_k dG/dp_k - dF/dp_k dG/dq_k, k = 1..n (no sum)."""
    dF, dG = differential(F, x), differential(G, x)
    n = dF.shape[0] // 2
    return dF[:n] * dG[n:] - dF[n:] * dG[:n]


def numerical_rank(rows: np.ndarray, tol: float = 1e-9) -> int:
    """Count singular values above ``tol * sigma_max`` after normalising each nonzero row."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > 0
    if not keep.any():
        return 0
    s = np.linalg.svd(rows[keep] / norms[keep, None], compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def covector_rank(ws: Sequence, x, tol: float = 1e-9) -> int:
    """Numerical rank of a family of covectors at ``x``.

    Items may be CovectorFields, scalar fields (their differential is used)
    or plain arrays. Rows are normalised first, so the result is invariant
    under permutations and nonzero rescaling of the inputs.
    """
    if not ws:
        raise ValueError("covector_rank needs at least one covector")
    rows = []
    for w in ws:
        if isinstance(w, CovectorField):
            rows.append(w(x))
        elif isinstance(w, np.ndarray):
            rows.append(w)
        else:
            rows.append(differential(w, x))
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise DimensionError(f"covectors of mixed dimensions {sorted(dims)}")
    return numerical_rank(np.array(rows), tol)
