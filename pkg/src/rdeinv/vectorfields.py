"""Vector field collections on d-space: Jacobians, Lie brackets, compositions.

Evaluators must be pure and reentrant; a VectorFieldSet can be shared across
parallel workers.  Indices are 0-based throughout.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidParameter,
    NonFinite,
)


def fd_jacobian(fun, x, step=1e-5):
    """Central-difference Jacobian of fun at x; column j uses x +- step*e_j."""
    if not step > 0:
        raise InvalidParameter("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = step
        cols.append((np.asarray(fun(x + e), float) - np.asarray(fun(x - e), float)))
    jac = np.column_stack(cols) / (2.0 * step)
    if not np.all(np.isfinite(jac)):
        raise NonFinite("field evaluation produced non-finite values")
    return jac


class VectorFieldSet:
    """A tuple of vector fields on R^d with value and Jacobian access.

    Parameters
    ----------
    evals : sequence of callables, each mapping a (d,) array to a (d,) array.
    d : state dimension.
    jacs : optional sequence of callables returning (d, d) Jacobians.  When
        omitted, Jacobians come from central finite differences with fd_step.
    fd_step : finite-difference step, default 1e-5 (truncation/round-off
        balance for double precision).
    """

    __slots__ = ("_evals", "_jacs", "d", "ell", "fd_step", "jac_mode")

    def __init__(self, evals, d, jacs=None, fd_step=1e-5, jac_mode=None):
        self._evals = tuple(evals)
        self.ell = len(self._evals)
        self.d = int(d)
        if self.ell == 0 or self.d <= 0:
            raise InvalidParameter("need at least one field on a positive-dimensional space")
        if jacs is not None:
            jacs = tuple(jacs)
            if len(jacs) != self.ell:
                raise DimensionMismatch("need one Jacobian per field")
        self._jacs = jacs
        if not fd_step > 0:
            raise InvalidParameter("fd_step must be positive")
        self.fd_step = float(fd_step)
        self.jac_mode = jac_mode or ("analytic" if jacs else "finite-difference")

    def _check_index(self, i):
        if not 0 <= i < self.ell:
            raise IndexOutOfRange(f"field index {i} not in [0, {self.ell})")

    def field(self, i, x):
        """Value of field i at x as a (d,) array."""
        self._check_index(i)
        out = np.asarray(self._evals[i](np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.d,):
            raise DimensionMismatch(
                f"field {i} returned shape {out.shape}, expected {(self.d,)}"
            )
        return out

    def jacobian(self, i, x):
        """Jacobian of field i at x as a (d, d) array."""
        self._check_index(i)
        if self._jacs is not None:
            out = np.asarray(self._jacs[i](np.asarray(x, dtype=float)), dtype=float)
            if out.shape != (self.d, self.d):
                raise DimensionMismatch(
                    f"jacobian {i} returned shape {out.shape}, expected {(self.d, self.d)}"
                )
            return out
        return fd_jacobian(self._evals[i], x, self.fd_step)

    def fields_at(self, x):
        """All field values at x, stacked as an (ell, d) array."""
        out = np.empty((self.ell, self.d))
        for i in range(self.ell):
            out[i] = self.field(i, x)
        return out

    def jacobians_at(self, x):
        """All Jacobians at x, stacked as an (ell, d, d) array."""
        out = np.empty((self.ell, self.d, self.d))
        for i in range(self.ell):
            out[i] = self.jacobian(i, x)
        return out


def bracket(V: VectorFieldSet, j, k, x):
    """Lie bracket [V_j, V_k](x) = DV_k(x) V_j(x) - DV_j(x) V_k(x)."""
    x = np.asarray(x, dtype=float)
    return V.jacobian(k, x) @ V.field(j, x) - V.jacobian(j, x) @ V.field(k, x)


def second_comp(V: VectorFieldSet, j, k, x):
    """Directional derivative of V_k along V_j at x: DV_k(x) V_j(x).

    bracket(V, j, k, x) == second_comp(V, j, k, x) - second_comp(V, k, j, x).
    """
    x = np.asarray(x, dtype=float)
    return V.jacobian(k, x) @ V.field(j, x)


def stack_points(V: VectorFieldSet, points) -> VectorFieldSet:
    """Fields on (c*d)-space acting block-wise on c copies of the state.

    W_i(y_1, ..., y_c) concatenates V_i(y_1) ... V_i(y_c); Jacobians are block
    diagonal, so brackets of the stacked fields concatenate pointwise brackets.
    `points` only fixes c; the stacked fields accept any (c*d,) state.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c, d = points.shape
    if d != V.d:
        raise DimensionMismatch(f"points have dimension {d}, fields live on {V.d}-space")

    def make_eval(i):
        def ev(z):
            blocks = [V.field(i, z[r * d : (r + 1) * d]) for r in range(c)]
            return np.concatenate(blocks)

        return ev

    def make_jac(i):
        def ja(z):
            out = np.zeros((c * d, c * d))
            for r in range(c):
                out[r * d : (r + 1) * d, r * d : (r + 1) * d] = V.jacobian(
                    i, z[r * d : (r + 1) * d]
                )
            return out

        return ja

    return VectorFieldSet(
        [make_eval(i) for i in range(V.ell)],
        d=c * d,
        jacs=[make_jac(i) for i in range(V.ell)],
        fd_step=V.fd_step,
        jac_mode=V.jac_mode,
    )
