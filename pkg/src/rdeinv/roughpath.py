"""Level-2 weakly geometric rough paths on time grids.

An increment is the pair (x, a): the level-1 increment and the antisymmetric
area swept over one interval.  Only this pair is stored; the full second-level
tensor  XX = 0.5 * outer(x, x) + a  is materialised on demand, so the
weak-geometricity constraint (symmetric part equals 0.5 * outer(x, x)) holds
structurally and cannot be violated.

Everything here is immutable after construction and all operations are pure,
so values can be shared freely across threads.  The only random number
generation is local to the Brownian samplers and is seeded per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, InvalidGrid, InvalidParameter

# Symmetric residue above this threshold signals a caller bug rather than
# accumulated round-off; smaller residues are silently antisymmetrized away.
_ANTISYM_REJECT = 1e-9


def _antisymmetric_part(a, context):
    a = np.asarray(a, dtype=float)
    residue = np.max(np.abs(a + a.T)) * 0.5 if a.size else 0.0
    if residue > _ANTISYM_REJECT:
        raise InvalidParameter(
            f"{context}: matrix is not antisymmetric (symmetric residue {residue:.3e})"
        )
    return 0.5 * (a - a.T)


class RoughIncrement:
    """Rough-path increment over one interval.

    x is the level-1 increment (length ell), a the antisymmetric area matrix.
    The constructor antisymmetrizes a and rejects inputs whose symmetric part
    is too large to be round-off.
    """

    __slots__ = ("x", "a")

    def __init__(self, x, a=None):
        x = np.array(x, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise DimensionMismatch("increment x must be a nonempty 1-d vector")
        ell = x.size
        if a is None:
            a = np.zeros((ell, ell))
        else:
            a = np.asarray(a, dtype=float)
            if a.shape != (ell, ell):
                raise DimensionMismatch(
                    f"area must have shape {(ell, ell)}, got {a.shape}"
                )
            a = _antisymmetric_part(a, "RoughIncrement")
        x.setflags(write=False)
        a.setflags(write=False)
        self.x = x
        self.a = a

    @classmethod
    def _trusted(cls, x, a):
        # fast path for data already validated (stored grid steps, scaled copies)
        inc = cls.__new__(cls)
        inc.x = x
        inc.a = a
        return inc

    @property
    def ell(self):
        return self.x.size

    @property
    def second_level(self):
        """Full second-level tensor 0.5 * outer(x, x) + a."""
        return 0.5 * np.outer(self.x, self.x) + self.a

    def __repr__(self):
        return f"RoughIncrement(ell={self.ell}, |x|={np.linalg.norm(self.x):.3g})"


def chen_mul(left: RoughIncrement, right: RoughIncrement) -> RoughIncrement:
    """Compose the increment over [s,u] with the one over [u,t].

    The level-1 parts add; the area picks up the antisymmetrized cross term
    0.5 * (outer(left.x, right.x) - outer(right.x, left.x)).
    """
    if left.ell != right.ell:
        raise DimensionMismatch(f"cannot compose ell={left.ell} with ell={right.ell}")
    cross = np.outer(left.x, right.x)
    return RoughIncrement(
        left.x + right.x,
        left.a + right.a + 0.5 * (cross - cross.T),
    )


class GridRoughPath:
    """Rough path sampled on a time grid.

    Stores the path values at the grid points plus one antisymmetric area
    matrix per grid step; increments over wider spans follow by Chen
    composition of the per-step data.  alpha is user metadata (the Holder
    exponent the data is meant to carry); nothing is estimated from it.
    """

    __slots__ = ("times", "values", "step_areas", "alpha")

    def __init__(self, times, values, step_areas=None, alpha=0.5):
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidGrid("need at least two grid times")
        if np.any(np.diff(times) <= 0):
            raise InvalidGrid("grid times must be strictly increasing")
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != times.size:
            raise InvalidGrid(
                f"got {values.shape[0]} value rows for {times.size} grid times"
            )
        n, ell = times.size - 1, values.shape[1]
        if step_areas is None:
            step_areas = np.zeros((n, ell, ell))
        else:
            step_areas = np.array(step_areas, dtype=float)
            if step_areas.shape != (n, ell, ell):
                raise InvalidGrid(
                    f"step_areas must have shape {(n, ell, ell)}, got {step_areas.shape}"
                )
            residue = 0.5 * np.max(np.abs(step_areas + np.swapaxes(step_areas, 1, 2)))
            if residue > _ANTISYM_REJECT:
                raise InvalidParameter(
                    f"step areas are not antisymmetric (residue {residue:.3e})"
                )
            step_areas = 0.5 * (step_areas - np.swapaxes(step_areas, 1, 2))
        alpha = float(alpha)
        if not (1.0 / 3.0 < alpha <= 0.5):
            raise InvalidParameter(f"alpha must lie in (1/3, 1/2], got {alpha}")
        for arr in (times, values, step_areas):
            arr.setflags(write=False)
        self.times = times
        self.values = values
        self.step_areas = step_areas
        self.alpha = alpha

    @property
    def n(self):
        """Number of grid steps."""
        return self.times.size - 1

    @property
    def ell(self):
        return self.values.shape[1]

    def step_increment(self, i) -> RoughIncrement:
        """Stored data of step i as an increment."""
        if not 0 <= i < self.n:
            raise IndexOutOfRange(f"step index {i} not in [0, {self.n})")
        return RoughIncrement._trusted(
            self.values[i + 1] - self.values[i], self.step_areas[i]
        )

    def increment(self, i, j) -> RoughIncrement:
        """Increment over [t_i, t_j], the left-to-right Chen fold of steps i..j-1."""
        if not (0 <= i < j <= self.n):
            raise IndexOutOfRange(f"need 0 <= i < j <= {self.n}, got i={i}, j={j}")
        ell = self.ell
        x_acc = np.zeros(ell)
        a_acc = np.zeros((ell, ell))
        for k in range(i, j):
            dx = self.values[k + 1] - self.values[k]
            cross = np.outer(x_acc, dx)
            a_acc += self.step_areas[k] + 0.5 * (cross - cross.T)
            x_acc = x_acc + dx
        return RoughIncrement(x_acc, a_acc)

    def __repr__(self):
        return f"GridRoughPath(n={self.n}, ell={self.ell}, alpha={self.alpha})"


def lift_piecewise_linear(times, values, alpha=0.5) -> GridRoughPath:
    """Canonical lift of a sampled path: every step area is zero.

    A straight segment sweeps no area relative to its own chord, so the full
    second level of each step is exactly 0.5 * outer(dx, dx); areas over wider
    intervals arise purely from Chen composition.
    """
    return GridRoughPath(times, values, None, alpha)


def refine(path: GridRoughPath, factor: int) -> GridRoughPath:
    """Split every grid step into `factor` equal Chen substeps.

    A substep carries (x/factor, a/factor); composing the substeps returns the
    original step exactly, because the cross terms of collinear level-1 pieces
    vanish.  Values are interpolated linearly.
    """
    factor = int(factor)
    if factor < 1:
        raise InvalidParameter("refinement factor must be >= 1")
    if factor == 1:
        return path
    t, v = path.times, path.values
    frac = np.arange(factor) / factor
    dt = np.diff(t)
    dx = np.diff(v, axis=0)
    new_times = np.append((t[:-1, None] + frac[None, :] * dt[:, None]).ravel(), t[-1])
    inner = v[:-1, None, :] + frac[None, :, None] * dx[:, None, :]
    new_values = np.vstack([inner.reshape(-1, path.ell), v[-1][None, :]])
    new_areas = np.repeat(path.step_areas / factor, factor, axis=0)
    return GridRoughPath(new_times, new_values, new_areas, path.alpha)


def coarsen(path: GridRoughPath, factor: int) -> GridRoughPath:
    """Keep every `factor`-th grid point, Chen-composing the step data between.

    No interpolation: the surviving values and the composed (x, a) step data
    are exactly those of the original path on the coarse grid.
    """
    factor = int(factor)
    if factor < 1:
        raise InvalidParameter("coarsening factor must be >= 1")
    if path.n % factor != 0:
        raise InvalidGrid(f"cannot coarsen {path.n} steps by factor {factor}")
    if factor == 1:
        return path
    nc, ell = path.n // factor, path.ell
    dx = np.diff(path.values, axis=0).reshape(nc, factor, ell)
    # partial level-1 sums before each substep within a block
    prefix = np.cumsum(dx, axis=1) - dx
    cross = np.einsum("kmi,kmj->kij", prefix, dx)
    areas = path.step_areas.reshape(nc, factor, ell, ell).sum(axis=1)
    areas += 0.5 * (cross - np.swapaxes(cross, 1, 2))
    return GridRoughPath(
        path.times[::factor], path.values[::factor], areas, path.alpha
    )


def circle_samples(n, turns=1.0):
    """Unit circle sampled at n+1 uniform parameter values over `turns` loops."""
    if n < 1:
        raise InvalidParameter("need at least one segment")
    times = np.linspace(0.0, 2.0 * np.pi * turns, n + 1)
    return times, np.column_stack([np.cos(times), np.sin(times)])


def sample_brownian_fine(ell, n_coarse, n_fine, horizon, seed) -> GridRoughPath:
    """Piecewise-linear lift of a Brownian path on its fine simulation grid.

    Simulates n_coarse * n_fine Gaussian steps with variance equal to the step
    length.  Deterministic given the seed; `sample_brownian_lift` coarsens this
    exact path, so the two share their increments on the coarse grid.
    """
    if ell < 1 or n_coarse < 1 or n_fine < 1:
        raise InvalidParameter("ell, n_coarse and n_fine must be positive")
    if not horizon > 0:
        raise InvalidParameter("horizon must be positive")
    rng = np.random.default_rng(seed)
    n = n_coarse * n_fine
    dt = horizon / n
    steps = rng.standard_normal((n, ell)) * np.sqrt(dt)
    values = np.vstack([np.zeros(ell), np.cumsum(steps, axis=0)])
    times = np.linspace(0.0, horizon, n + 1)
    return GridRoughPath(times, values, None, alpha=0.4)


def sample_brownian_lift(ell, n_coarse, n_fine, horizon, seed) -> GridRoughPath:
    """Brownian rough path on the coarse grid.

    The fine polygonal approximation is lifted and then coarsened by Chen
    composition, so each coarse step carries the area the fine path actually
    swept.  alpha defaults to 0.4.
    """
    fine = sample_brownian_fine(ell, n_coarse, n_fine, horizon, seed)
    return coarsen(fine, n_fine)


def area_components(a):
    """Strict upper triangle of an antisymmetric matrix, pairs (j,k) with j<k row by row."""
    a = np.asarray(a, dtype=float)
    return a[np.triu_indices(a.shape[0], 1)]


def area_matrix(components, ell):
    """Antisymmetric matrix whose strict upper triangle is `components` (inverse of area_components)."""
    components = np.asarray(components, dtype=float)
    expected = ell * (ell - 1) // 2
    if components.shape != (expected,):
        raise DimensionMismatch(
            f"need {expected} area components for ell={ell}, got {components.shape}"
        )
    a = np.zeros((ell, ell))
    a[np.triu_indices(ell, 1)] = components
    return a - a.T


def make_linear_rough_path(v, ell, times, alpha=0.5) -> GridRoughPath:
    """Rough path whose increments are exactly linear in the interval length.

    Over any grid interval [s,t] the increment is (v_lin*(t-s), A*(t-s)), with
    v_lin the first ell entries of v and A the antisymmetric matrix built from
    the remaining ell*(ell-1)/2 entries.  Assigning each step its (v*dt) pair
    achieves this on every interval: the Chen cross terms vanish because all
    level-1 pieces are collinear.  v = 0 gives the null rough path.
    """
    v = np.asarray(v, dtype=float)
    m = ell * (ell + 1) // 2
    if v.shape != (m,):
        raise DimensionMismatch(f"v must have length {m} for ell={ell}, got {v.shape}")
    times = np.asarray(times, dtype=float)
    v_lin = v[:ell]
    a_mat = area_matrix(v[ell:], ell)
    values = np.outer(times - times[0], v_lin)
    step_areas = a_mat[None, :, :] * np.diff(times)[:, None, None]
    return GridRoughPath(times, values, step_areas, alpha)


@dataclass(frozen=True)
class HolderNorms:
    """Grid estimates of the three components of the rough-path norm."""

    sup_norm: float
    holder1: float
    holder2: float


def holder_norms(path: GridRoughPath, alpha=None) -> HolderNorms:
    """Grid estimates of sup |X|, the level-1 alpha-Holder norm and the
    level-2 (2*alpha)-Holder norm.

    All pairs of grid points are scanned, so these are lower bounds of the
    true suprema; O(n^2) work, intended for desk-scale grids.
    """
    if alpha is None:
        alpha = path.alpha
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter("alpha must lie in (0, 1)")
    t, v = path.times, path.values
    n, ell = path.n, path.ell
    sup_norm = float(np.max(np.linalg.norm(v, axis=1)))
    # cumulative areas from the left endpoint
    cum = np.zeros((n + 1, ell, ell))
    x_acc = np.zeros(ell)
    for k in range(n):
        dx = v[k + 1] - v[k]
        cross = np.outer(x_acc, dx)
        cum[k + 1] = cum[k] + path.step_areas[k] + 0.5 * (cross - cross.T)
        x_acc = x_acc + dx
    holder1 = 0.0
    holder2 = 0.0
    for i in range(n):
        dt = t[i + 1 :] - t[i]
        xj = v[i + 1 :] - v[i]
        holder1 = max(holder1, float(np.max(np.linalg.norm(xj, axis=1) / dt**alpha)))
        x0i = v[i] - v[0]
        a_ij = (
            cum[i + 1 :]
            - cum[i]
            - 0.5
            * (
                np.einsum("p,kq->kpq", x0i, xj)
                - np.einsum("kp,q->kpq", xj, x0i)
            )
        )
        xx = 0.5 * np.einsum("kp,kq->kpq", xj, xj) + a_ij
        frob = np.sqrt(np.sum(xx * xx, axis=(1, 2)))
        holder2 = max(holder2, float(np.max(frob / dt ** (2 * alpha))))
    return HolderNorms(sup_norm, holder1, holder2)


def _fmt(x):
    return f"{x:.17g}"


def write_path_csv(path: GridRoughPath, file):
    """Write the path grid to CSV: t,X1..Xl then one area column per pair (j,k), j<k.

    Row i carries the step area of [t_{i-1}, t_i]; the first row is zeros.
    """
    ell = path.ell
    pairs = [(j, k) for j in range(ell) for k in range(j + 1, ell)]
    header = ["t"] + [f"X{i+1}" for i in range(ell)]
    header += [f"A{j+1}{k+1}" for j, k in pairs]
    lines = [",".join(header)]
    for i in range(path.n + 1):
        row = [_fmt(path.times[i])] + [_fmt(x) for x in path.values[i]]
        if pairs:
            area = np.zeros(len(pairs)) if i == 0 else area_components(path.step_areas[i - 1])
            row += [_fmt(x) for x in area]
        lines.append(",".join(row))
    with open(file, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_path_csv(file, alpha=0.5) -> GridRoughPath:
    """Read a path CSV written by write_path_csv.

    Area columns are optional; without them the result is the piecewise-linear
    lift of the sampled values.  alpha is not stored in the file and must be
    supplied by the caller.
    """
    with open(file, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise InvalidGrid(f"{file}: empty path file")
    header = lines[0].split(",")
    if header[0] != "t":
        raise InvalidGrid(f"{file}: first column must be 't', got {header[0]!r}")
    ell = 0
    for name in header[1:]:
        if name.startswith("X"):
            ell += 1
        else:
            break
    if ell == 0:
        raise InvalidGrid(f"{file}: no X columns found")
    n_pairs = ell * (ell - 1) // 2
    has_areas = len(header) == 1 + ell + n_pairs and n_pairs > 0
    if len(header) != 1 + ell and not has_areas:
        raise InvalidGrid(f"{file}: expected {1 + ell} or {1 + ell + n_pairs} columns")
    rows = [np.array([float(x) for x in ln.split(",")]) for ln in lines[1:]]
    data = np.vstack(rows)
    times = data[:, 0]
    values = data[:, 1 : 1 + ell]
    if has_areas:
        n = times.size - 1
        comps = data[1:, 1 + ell :]
        step_areas = np.stack([area_matrix(comps[i], ell) for i in range(n)])
    else:
        step_areas = None
    return GridRoughPath(times, values, step_areas, alpha)
