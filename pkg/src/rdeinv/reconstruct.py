"""Recovery of the driving rough path from flow observations.

The forward model for one interval is either the second-order Taylor map or
the log-ODE flow map in the m = ell*(ell+1)/2 parameters (A, B): level-1
increment plus strict-upper-triangle area components.  Recovery minimises the
stacked squared distance to the observed flow images by Gauss-Newton with
Levenberg damping; it is possible exactly when the matrix of field values and
bracket values at the base points has rank m.

All operations are pure; batches over many intervals can run in parallel and
are aggregated by interval index.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateField,
    DimensionMismatch,
    DomainViolation,
    InvalidGrid,
    InvalidParameter,
    NonFinite,
    NotConverged,
    OutOfNeighborhood,
    RankDeficient,
    TrustRegionExceeded,
)
from .rde import ObservationSet, logode_step
from .roughpath import (
    GridRoughPath,
    RoughIncrement,
    area_components,
    area_matrix,
)
from .vectorfields import VectorFieldSet

DEFAULT_RANK_TOL = 1e-10


@dataclass(eq=False)
class ReconstructionMatrix:
    """Stacked field and bracket values at the base points, with its SVD rank."""

    m: int
    mat: np.ndarray
    singular_values: np.ndarray
    rank: int
    tol_rel: float


@dataclass(eq=False)
class ReconstructionResult:
    """Recovered increment estimate with solver and trust-region diagnostics."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    residual: float
    residual_sup: float
    iterations: int
    eps1: float
    eps2: float
    method: str
    warnings: tuple = ()

    def __post_init__(self):
        self.a_hat = np.asarray(self.a_hat, dtype=float)
        self.b_hat = np.asarray(self.b_hat, dtype=float)
        if np.max(np.abs(self.b_hat + self.b_hat.T)) > 1e-12:
            raise InvalidParameter("b_hat must be antisymmetric")
        if not np.isfinite(self.residual):
            raise NonFinite("residual must be finite")

    @property
    def increment(self) -> RoughIncrement:
        return RoughIncrement(self.a_hat, self.b_hat)


def _point_blocks(V: VectorFieldSet, points):
    """Per-point field values (c,ell,d), bracket columns (c,nb,d) and
    second compositions (c,ell,ell,d)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c, d = points.shape
    if d != V.d:
        raise DimensionMismatch(f"points have dimension {d}, fields live on {V.d}-space")
    ell = V.ell
    nb = ell * (ell - 1) // 2
    fields = np.empty((c, ell, d))
    comps = np.empty((c, ell, ell, d))
    brackets = np.empty((c, nb, d))
    for r, y in enumerate(points):
        e = V.fields_at(y)
        j = V.jacobians_at(y)
        fields[r] = e
        for b in range(ell):
            comps[r, :, b] = e @ j[b].T  # comps[r, a, b] = J_b @ e_a
        p = 0
        for a in range(ell):
            for b in range(a + 1, ell):
                brackets[r, p] = comps[r, a, b] - comps[r, b, a]
                p += 1
    return points, fields, brackets, comps


def _stack_columns(fields, brackets):
    """Assemble the (c*d, m) matrix: field columns then bracket columns."""
    c, ell, d = fields.shape
    nb = brackets.shape[1]
    mat = np.empty((c * d, ell + nb))
    for r in range(c):
        rows = slice(r * d, (r + 1) * d)
        mat[rows, :ell] = fields[r].T
        mat[rows, ell:] = brackets[r].T
    return mat


def reconstruction_matrix(V: VectorFieldSet, points, tol_rel=DEFAULT_RANK_TOL):
    """Matrix of field values and bracket values at the base points.

    Columns are V_1 .. V_ell followed by [V_j, V_k] for j < k in row-major
    pair order; row block r holds the values at point r.  The rank counts
    singular values above tol_rel times the largest one.
    """
    _, fields, brackets, _ = _point_blocks(V, points)
    mat = _stack_columns(fields, brackets)
    m = V.ell * (V.ell + 1) // 2
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(sv > tol_rel * sv[0]))
    return ReconstructionMatrix(m, mat, sv, rank, float(tol_rel))


def taylor_map(V: VectorFieldSet, points, A, B):
    """Second-order model of the flow images, stacked over the base points.

    Phi_y(A, B) = y + A^i V_i(y) + B^{jk} [V_j,V_k](y) + 0.5 A^i A^j (V_i V_j)(y),
    exactly quadratic in A and linear in the strict upper triangle of B.
    """
    points, fields, brackets, comps = _point_blocks(V, points)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != (V.ell,) or B.shape != (V.ell, V.ell):
        raise DimensionMismatch("A must be an ell-vector and B an ell x ell matrix")
    bvec = area_components(B)
    out = (
        points
        + np.einsum("i,cid->cd", A, fields)
        + np.einsum("p,cpd->cd", bvec, brackets)
        + 0.5 * np.einsum("i,j,cijd->cd", A, A, comps)
    )
    return out.ravel()


def flow_map(V: VectorFieldSet, points, A, B, n_sub=16):
    """Log-ODE flow images exp(A^i V_i + B^{jk} [V_j, V_k]) of the base points, stacked."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inc = RoughIncrement(A, B)
    return np.concatenate([logode_step(V, y, inc, n_sub) for y in points])


def _second_comp_total(comps):
    """Sum over all ordered pairs (i, j) of the stacked Euclidean norms |V_i V_j|."""
    c, ell = comps.shape[0], comps.shape[1]
    flat = comps.reshape(c, ell, ell, -1)
    norms = np.sqrt(np.einsum("cijd,cijd->ij", flat, flat))
    return float(norms.sum())


def trust_region(V: VectorFieldSet, points, tol_rel=DEFAULT_RANK_TOL):
    """Constants (eps1, eps2) of the local recovery problem at these points.

    eps1 is the reciprocal pseudo-inverse norm of the model Jacobian at 0,
    i.e. the smallest singular value of the reconstruction matrix; eps2 is the
    model injectivity radius 1 / (2 sum_{i,j} |V_i V_j|) with the Euclidean
    norm of each stacked composition vector.  Requires full rank m.
    """
    _, fields, brackets, comps = _point_blocks(V, points)
    mat = _stack_columns(fields, brackets)
    m = V.ell * (V.ell + 1) // 2
    sv = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(sv > tol_rel * sv[0])) if sv.size and sv[0] > 0 else 0
    if rank < m:
        raise RankDeficient(f"reconstruction matrix has rank {rank} < m = {m}")
    eps1 = float(sv[m - 1])
    total = _second_comp_total(comps)
    eps2 = float("inf") if total == 0.0 else 1.0 / (2.0 * total)
    return eps1, eps2


def _minimize_least_squares(residual, jacobian, theta0, max_iter, tol):
    """Gauss-Newton with Levenberg damping on 0.5*|residual|^2.

    Returns (theta, iterations, residual_vector); converged when the proposed
    step norm drops below tol.  Raises NotConverged when the iteration budget
    is exhausted or no damped step decreases the cost.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    r = residual(theta)
    cost = float(r @ r)
    lam = 1e-8
    n_params = theta.size
    for it in range(1, max_iter + 1):
        jac = jacobian(theta)
        grad = jac.T @ r
        hess = jac.T @ jac
        delta = None
        accepted = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(hess + lam * np.eye(n_params), -grad)
            except np.linalg.LinAlgError:
                lam = max(lam, 1e-14) * 10.0
                continue
            if float(np.linalg.norm(delta)) < tol:
                return theta, it, r
            r_new = residual(theta + delta)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost * (1.0 + 1e-14) + 1e-300:
                accepted = True
                break
            lam = max(lam, 1e-14) * 10.0
            if lam > 1e12:
                break
        if not accepted:
            raise NotConverged(f"no acceptable damped step at iteration {it}")
        theta = theta + delta
        r, cost = r_new, cost_new
        lam *= 0.1
        if float(np.linalg.norm(delta)) < tol:
            return theta, it, r
    raise NotConverged(f"step norm above {tol} after {max_iter} iterations")


def _unpack(theta, ell):
    return theta[:ell], area_matrix(theta[ell:], ell)


def _result_from(theta, iterations, rvec, V, obs, eps1, eps2, method):
    a_hat, b_hat = _unpack(theta, V.ell)
    per_point = rvec.reshape(obs.c, V.d)
    residual_sup = float(np.max(np.linalg.norm(per_point, axis=1)))
    tags = []
    scale = float(np.linalg.norm(theta))
    if scale > eps2:
        tags.append("trust_region_exceeded")
        _warnings.warn(
            TrustRegionExceeded(
                f"|(A, B)| = {scale:.3e} exceeds the injectivity radius eps2 = {eps2:.3e}"
            )
        )
    return ReconstructionResult(
        a_hat=a_hat,
        b_hat=b_hat,
        residual=float(np.linalg.norm(rvec)),
        residual_sup=residual_sup,
        iterations=iterations,
        eps1=eps1,
        eps2=eps2,
        method=method,
        warnings=tuple(tags),
    )


def _prepare(V, obs, tol_rel):
    rm = reconstruction_matrix(V, obs.base_points, tol_rel)
    if rm.rank < rm.m:
        raise RankDeficient(
            f"reconstruction matrix has rank {rm.rank} < m = {rm.m}; "
            "these base points cannot separate the driver parameters"
        )
    _, fields, brackets, comps = _point_blocks(V, obs.base_points)
    eps1 = float(rm.singular_values[rm.m - 1])
    total = _second_comp_total(comps)
    eps2 = float("inf") if total == 0.0 else 1.0 / (2.0 * total)
    dz = (obs.observed - obs.base_points).ravel()
    a0 = np.linalg.lstsq(rm.mat[:, : V.ell], dz, rcond=None)[0]
    theta0 = np.concatenate([a0, np.zeros(rm.m - V.ell)])
    return rm, fields, brackets, comps, eps1, eps2, theta0


def local_reconstruct_taylor(V: VectorFieldSet, obs: ObservationSet, max_iter=50, tol=1e-12):
    """Recover (A, B) from one observation set using the Taylor model.

    Initialisation fits A by linear least squares against the field columns
    (B = 0); the Jacobian is the reconstruction matrix plus the A-linear
    correction 0.5*(A^i V_i V_j + A^j V_j V_i) in the A columns.
    """
    rm, fields, brackets, comps, eps1, eps2, theta0 = _prepare(V, obs, DEFAULT_RANK_TOL)
    ell = V.ell
    target = obs.observed.ravel()
    base = obs.base_points
    sym = comps + np.swapaxes(comps, 1, 2)  # sym[c,i,j] = V_iV_j + V_jV_i

    def residual(theta):
        A = theta[:ell]
        bvec = theta[ell:]
        out = (
            base
            + np.einsum("i,cid->cd", A, fields)
            + np.einsum("p,cpd->cd", bvec, brackets)
            + 0.5 * np.einsum("i,j,cijd->cd", A, A, comps)
        )
        return out.ravel() - target

    def jacobian(theta):
        A = theta[:ell]
        jac = rm.mat.copy()
        corr = 0.5 * np.einsum("j,cijd->cid", A, sym)
        c, d = base.shape
        for r in range(c):
            jac[r * d : (r + 1) * d, :ell] += corr[r].T
        return jac

    theta, iterations, rvec = _minimize_least_squares(
        residual, jacobian, theta0, max_iter, tol
    )
    return _result_from(theta, iterations, rvec, V, obs, eps1, eps2, "taylor")


def local_reconstruct_flow(
    V: VectorFieldSet, obs: ObservationSet, max_iter=50, tol=1e-12, n_sub=16, fd_step=1e-6
):
    """Recover (A, B) by matching log-ODE flow images of the base points.

    Same initialisation and stopping rules as the Taylor variant; the Jacobian
    comes from central finite differences in the m parameters.
    """
    _, _, _, _, eps1, eps2, theta0 = _prepare(V, obs, DEFAULT_RANK_TOL)
    ell = V.ell
    target = obs.observed.ravel()
    base = obs.base_points

    def model(theta):
        a, b = _unpack(theta, ell)
        return flow_map(V, base, a, b, n_sub)

    def residual(theta):
        return model(theta) - target

    def jacobian(theta):
        cols = []
        for p in range(theta.size):
            e = np.zeros(theta.size)
            e[p] = fd_step
            cols.append((model(theta + e) - model(theta - e)) / (2.0 * fd_step))
        return np.column_stack(cols)

    theta, iterations, rvec = _minimize_least_squares(
        residual, jacobian, theta0, max_iter, tol
    )
    return _result_from(theta, iterations, rvec, V, obs, eps1, eps2, "flow")


def doss_sussmann_1d(
    V: VectorFieldSet,
    y,
    observed,
    tol=1e-12,
    max_iter=100,
    steps_per_unit=256,
    param_bound=100.0,
):
    """Invert a -> exp(a V_1)(y) for a single field on the line.

    Newton iteration on the numerically integrated flow; each correction
    continues the integration from the current state, so the total work is
    about two traversals of the parameter interval.  Exact up to the solver
    tolerance: in this case the log-ODE flow equals the solution flow.
    """
    if V.ell != 1 or V.d != 1:
        raise DimensionMismatch("doss_sussmann_1d needs a single field on 1-space")
    y = float(y)
    observed = float(observed)
    ev = V._evals[0]

    def vfield(z):
        return float(np.asarray(ev(np.array([z])), dtype=float)[0])

    if abs(vfield(y)) < 1e-14:
        raise DegenerateField("V_1 vanishes at the base point")

    def advance(z, da):
        n = max(8, int(np.ceil(abs(da) * steps_per_unit)))
        h = 1.0 / n
        for _ in range(n):
            k1 = da * vfield(z)
            k2 = da * vfield(z + 0.5 * h * k1)
            k3 = da * vfield(z + 0.5 * h * k2)
            k4 = da * vfield(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return z

    a, z = 0.0, y
    scale = max(1.0, abs(observed))
    for _ in range(max_iter):
        err = z - observed
        if abs(err) <= tol * scale:
            return a
        vz = vfield(z)
        if not np.isfinite(z) or abs(vz) < 1e-14:
            raise OutOfNeighborhood("flow became degenerate before reaching the target")
        step = -err / vz
        if abs(a + step) > param_bound:
            raise OutOfNeighborhood(f"parameter left [-{param_bound}, {param_bound}]")
        z = advance(z, step)
        a += step
    raise NotConverged(f"Newton did not reach tolerance {tol} in {max_iter} iterations")


def stitch(segments, times, alpha=0.5) -> GridRoughPath:
    """Assemble consecutive local increment estimates into a grid rough path.

    segments may be ReconstructionResult or RoughIncrement instances (or
    (x, a) pairs) on consecutive intervals; times has one more entry.  Path
    values are anchored at zero; wider increments arise by Chen composition.
    """
    times = np.asarray(times, dtype=float)
    pieces = []
    for seg in segments:
        if isinstance(seg, ReconstructionResult):
            pieces.append((seg.a_hat, seg.b_hat))
        elif isinstance(seg, RoughIncrement):
            pieces.append((seg.x, seg.a))
        else:
            x, a = seg
            pieces.append((np.asarray(x, dtype=float), np.asarray(a, dtype=float)))
    if times.ndim != 1 or times.size != len(pieces) + 1:
        raise InvalidGrid(
            f"need {len(pieces) + 1} grid times for {len(pieces)} segments"
        )
    ell = pieces[0][0].size
    if any(x.shape != (ell,) or a.shape != (ell, ell) for x, a in pieces):
        raise DimensionMismatch("all segments must share the signal dimension")
    values = np.vstack([np.zeros(ell), np.cumsum([x for x, _ in pieces], axis=0)])
    areas = np.stack([a for _, a in pieces])
    return GridRoughPath(times, values, areas, alpha)


@dataclass(eq=False)
class PointSearchResult:
    """Outcome of the greedy base-point search."""

    points: np.ndarray
    rank: int
    m: int
    sigma_min: float
    singular_values: np.ndarray

    @property
    def full_rank(self):
        return self.rank == self.m


def search_points(
    V: VectorFieldSet,
    box_lo,
    box_hi,
    c_max,
    seed,
    n_trials=64,
    tol_rel=DEFAULT_RANK_TOL,
) -> PointSearchResult:
    """Greedy random search for base points maximising the smallest singular value.

    Grows the point set one point at a time, keeping the candidate that
    maximises sigma_min of the reconstruction matrix, until rank m is reached
    or c_max points are used.  Deterministic given the seed; candidates that
    raise DomainViolation are skipped.  Failure is reported through
    rank < m in the returned diagnostics, not an exception.
    """
    if c_max < 1 or n_trials < 1:
        raise InvalidParameter("c_max and n_trials must be >= 1")
    lo = np.broadcast_to(np.asarray(box_lo, dtype=float), (V.d,)).copy()
    hi = np.broadcast_to(np.asarray(box_hi, dtype=float), (V.d,)).copy()
    if np.any(hi <= lo):
        raise InvalidParameter("box upper bounds must exceed lower bounds")
    rng = np.random.default_rng(seed)
    chosen = []
    best_mat = None
    for _ in range(c_max):
        best_cand, best_sig, best_cand_mat = None, -1.0, None
        for _ in range(n_trials):
            cand = rng.uniform(lo, hi)
            try:
                mat = reconstruction_matrix(V, chosen + [cand], tol_rel)
            except DomainViolation:
                continue
            sig = float(mat.singular_values[-1])
            if sig > best_sig:
                best_cand, best_sig, best_cand_mat = cand, sig, mat
        if best_cand is None:
            raise InvalidParameter("no admissible candidate points found in the box")
        chosen.append(best_cand)
        best_mat = best_cand_mat
        if best_mat.rank == best_mat.m:
            break
    return PointSearchResult(
        points=np.vstack(chosen),
        rank=best_mat.rank,
        m=best_mat.m,
        sigma_min=float(best_mat.singular_values[-1]),
        singular_values=best_mat.singular_values,
    )


def reconstruction_report(result: ReconstructionResult, s, t, matrix: ReconstructionMatrix):
    """JSON-ready summary of one local reconstruction."""
    return {
        "interval": [float(s), float(t)],
        "a_hat": [float(v) for v in result.a_hat],
        "b_hat": [[float(v) for v in row] for row in result.b_hat],
        "residual": float(result.residual),
        "residual_sup": float(result.residual_sup),
        "iterations": int(result.iterations),
        "rank": int(matrix.rank),
        "sigma_min": float(matrix.singular_values[-1]),
        "eps1": float(result.eps1),
        "eps2": float(result.eps2),
        "warnings": list(result.warnings),
    }


def _fmt(x):
    return f"{x:.17g}"


def write_observations_csv(obs_list, file):
    """Write observation sets to CSV: s,t,point_id,y1..yd,z1..zd."""
    obs_list = list(obs_list)
    if not obs_list:
        raise InvalidParameter("need at least one observation set")
    d = obs_list[0].base_points.shape[1]
    header = (
        ["s", "t", "point_id"]
        + [f"y{i+1}" for i in range(d)]
        + [f"z{i+1}" for i in range(d)]
    )
    lines = [",".join(header)]
    for obs in obs_list:
        for pid in range(obs.c):
            row = [_fmt(obs.s), _fmt(obs.t), str(pid)]
            row += [_fmt(v) for v in obs.base_points[pid]]
            row += [_fmt(v) for v in obs.observed[pid]]
            lines.append(",".join(row))
    with open(file, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_observations_csv(file):
    """Read observation sets grouped by interval, ordered by interval start.

    Base points must be consistent across intervals (the reconstruction
    matrix is shared); a mismatch raises InvalidParameter.
    """
    with open(file, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("s,t,point_id"):
        raise InvalidParameter(f"{file}: not an observation CSV")
    header = lines[0].split(",")
    d = (len(header) - 3) // 2
    groups = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        s, t = float(cells[0]), float(cells[1])
        pid = int(cells[2])
        y = np.array([float(v) for v in cells[3 : 3 + d]])
        z = np.array([float(v) for v in cells[3 + d : 3 + 2 * d]])
        groups.setdefault((s, t), {})[pid] = (y, z)
    obs_list = []
    base_ref = None
    for (s, t) in sorted(groups):
        rows = groups[(s, t)]
        pids = sorted(rows)
        base = np.vstack([rows[p][0] for p in pids])
        observed = np.vstack([rows[p][1] for p in pids])
        if base_ref is None:
            base_ref = base
        elif base.shape != base_ref.shape or np.max(np.abs(base - base_ref)) > 1e-12:
            raise InvalidParameter(
                f"{file}: base points differ between intervals; they must be shared"
            )
        obs_list.append(ObservationSet(base, s, t, observed))
    return obs_list
