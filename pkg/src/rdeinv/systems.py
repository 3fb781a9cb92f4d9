"""Named vector-field systems, with analytic Jacobians, usable from the CLI.

All constructors are pure and the returned systems are shareable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainViolation
from .vectorfields import VectorFieldSet

ROLLING_BALL_A1 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
ROLLING_BALL_A2 = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


@dataclass(eq=False)
class NamedSystem:
    """A vector-field set bundled with a name, suggested base points and notes."""

    name: str
    fields: VectorFieldSet
    recommended_points: list = field(default_factory=list)
    notes: str = ""


def rolling_ball() -> NamedSystem:
    """Unit ball rolling on a plane without slipping, orientation only.

    The state is the 3x3 orientation matrix flattened row-major into R^9; the
    two fields act by constant left matrix multiplication, so they are linear
    on the embedding space.  The orthogonal group is invariant under the flow.
    """

    def make(amat):
        def ev(x, a=amat):
            return (a @ x.reshape(3, 3)).ravel()

        jmat = np.kron(amat, np.eye(3))

        def ja(x, j=jmat):
            return j

        return ev, ja

    ev1, ja1 = make(ROLLING_BALL_A1)
    ev2, ja2 = make(ROLLING_BALL_A2)
    return NamedSystem(
        "rolling_ball",
        VectorFieldSet([ev1, ev2], d=9, jacs=[ja1, ja2]),
        recommended_points=[np.eye(3).ravel()],
        notes="orientation matrix embedded row-major in R^9; fields M -> A_i M",
    )


def unicycle() -> NamedSystem:
    """Planar unicycle: position (x1, x2) and heading x3.

    Field 1 moves along the current heading, field 2 turns.
    """

    def ev1(x):
        return np.array([np.cos(x[2]), np.sin(x[2]), 0.0])

    def ja1(x):
        out = np.zeros((3, 3))
        out[0, 2] = -np.sin(x[2])
        out[1, 2] = np.cos(x[2])
        return out

    def ev2(x):
        return np.array([0.0, 0.0, 1.0])

    def ja2(x):
        return np.zeros((3, 3))

    return NamedSystem(
        "unicycle",
        VectorFieldSet([ev1, ev2], d=3, jacs=[ja1, ja2]),
        recommended_points=[np.zeros(3)],
        notes="position and heading; rank condition holds at every point with c=1",
    )


def _cvt_ratio(x):
    q = x[3]
    if not 0.0 < q < 1.0:
        raise DomainViolation(f"belt translation q must lie in (0, 1), got {q}")
    return q


def cvt() -> NamedSystem:
    """Belt-and-cones variable transmission: state (theta1, theta2, b, q).

    The cone angles theta respond to belt motion b with gains 1/q and 1/(1-q);
    the controls drive b and the belt translation q directly.  The gains blow
    up at q in {0, 1}; evaluation outside (0, 1) raises DomainViolation rather
    than clamping, so convergence measurements cannot be silently corrupted.
    """

    def ev1(x):
        q = _cvt_ratio(x)
        return np.array([1.0 / q, 1.0 / (1.0 - q), 1.0, 0.0])

    def ja1(x):
        q = _cvt_ratio(x)
        out = np.zeros((4, 4))
        out[0, 3] = -1.0 / q**2
        out[1, 3] = 1.0 / (1.0 - q) ** 2
        return out

    def ev2(x):
        _cvt_ratio(x)
        return np.array([0.0, 0.0, 0.0, 1.0])

    def ja2(x):
        _cvt_ratio(x)
        return np.zeros((4, 4))

    return NamedSystem(
        "cvt",
        VectorFieldSet([ev1, ev2], d=4, jacs=[ja1, ja2]),
        recommended_points=[np.array([0.0, 0.0, 0.0, 0.5])],
        notes="domain restricted to 0 < q < 1 (q is the fourth coordinate)",
    )


def triple_product() -> NamedSystem:
    """Three quadratic fields on R^3: yz d/dx, xz d/dy, xy d/dz.

    All fields vanish on the coordinate axes, so single-axis points are
    degenerate; two generic points give the full rank 6.
    """

    def ev1(x):
        return np.array([x[1] * x[2], 0.0, 0.0])

    def ja1(x):
        out = np.zeros((3, 3))
        out[0, 1] = x[2]
        out[0, 2] = x[1]
        return out

    def ev2(x):
        return np.array([0.0, x[0] * x[2], 0.0])

    def ja2(x):
        out = np.zeros((3, 3))
        out[1, 0] = x[2]
        out[1, 2] = x[0]
        return out

    def ev3(x):
        return np.array([0.0, 0.0, x[0] * x[1]])

    def ja3(x):
        out = np.zeros((3, 3))
        out[2, 0] = x[1]
        out[2, 1] = x[0]
        return out

    return NamedSystem(
        "triple_product",
        VectorFieldSet([ev1, ev2, ev3], d=3, jacs=[ja1, ja2, ja3]),
        recommended_points=[
            np.array([1.0, 1.0, 1.0]),
            np.array([1.0, 2.0, 3.0]),
            np.array([3.0, 1.0, 2.0]),
        ],
        notes="rank 6 needs three observation points (any two share an exact "
        "kernel direction); fields vanish on the axes",
    )


def kohn(d=2) -> NamedSystem:
    """Sub-Riemannian frame of 2d horizontal fields on R^{2d+1}.

    Coordinates (x_1..x_d, y_1..y_d, t); the fields are
    X_i = d/dx_i + 2 y_i d/dt and Y_i = d/dy_i - 2 x_i d/dt, ordered
    (X_1..X_d, Y_1..Y_d).  All field values and brackets lie in a
    (2d+1)-dimensional space while there are d(2d+1) parameters, so the rank
    condition fails for every choice of points once d >= 2.  For d = 1 the
    single bracket spans the vertical direction and the rank condition holds.
    """
    d = int(d)
    if d < 1:
        raise DimensionMismatch("kohn needs d >= 1")
    dim = 2 * d + 1

    def make_x(i):
        def ev(x, i=i):
            out = np.zeros(dim)
            out[i] = 1.0
            out[dim - 1] = 2.0 * x[d + i]
            return out

        def ja(x, i=i):
            out = np.zeros((dim, dim))
            out[dim - 1, d + i] = 2.0
            return out

        return ev, ja

    def make_y(i):
        def ev(x, i=i):
            out = np.zeros(dim)
            out[d + i] = 1.0
            out[dim - 1] = -2.0 * x[i]
            return out

        def ja(x, i=i):
            out = np.zeros((dim, dim))
            out[dim - 1, i] = -2.0
            return out

        return ev, ja

    pairs = [make_x(i) for i in range(d)] + [make_y(i) for i in range(d)]
    return NamedSystem(
        f"kohn_{d}" if d != 2 else "kohn",
        VectorFieldSet([p[0] for p in pairs], d=dim, jacs=[p[1] for p in pairs]),
        recommended_points=[np.zeros(dim)],
        notes="degenerate for d >= 2: brackets only ever span the vertical direction",
    )


def constant_fields(ell, d) -> NamedSystem:
    """The first ell canonical basis fields on R^d; all brackets vanish.

    Solutions translate by the level-1 increment only, so the area of the
    driver leaves no trace in the flow.
    """
    if not 1 <= ell <= d:
        raise DimensionMismatch(f"need 1 <= ell <= d, got ell={ell}, d={d}")

    def make(i):
        vec = np.zeros(d)
        vec[i] = 1.0

        def ev(x, v=vec):
            return v

        def ja(x, z=np.zeros((d, d))):
            return z

        return ev, ja

    pairs = [make(i) for i in range(ell)]
    return NamedSystem(
        f"constant_{ell}_{d}",
        VectorFieldSet([p[0] for p in pairs], d=d, jacs=[p[1] for p in pairs]),
        recommended_points=[np.zeros(d)],
        notes="canonical basis fields; no bracket ever sees the area",
    )


SYSTEM_BUILDERS = {
    "rolling_ball": rolling_ball,
    "unicycle": unicycle,
    "cvt": cvt,
    "triple_product": triple_product,
    "kohn": kohn,
    "constant": constant_fields,
}
