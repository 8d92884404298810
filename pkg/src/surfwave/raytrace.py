"""Surface-wave rays under the effective Hamiltonian ``H = sqrt(Lambda)``.

The branch eigenvalue is tabulated on a tensor grid and stored as the
log phase velocity ``g = log(sqrt(Lambda) / |xi|)`` over the axes
``(x1, x2, log|xi|, theta)``. A quintic tensor-product B-spline interpolates
the table, with the direction axis periodic. Axes along which the model
cannot vary are dropped: the lateral axes for laterally homogeneous models
and the direction axis for isotropic or vertically transversely isotropic
ones. In both cases the corresponding derivatives vanish identically.

The ray equations are

    dx/dt = dH/dxi,   dxi/dt = -dH/dx,   dphase/dt = <xi, dx/dt>,

and tube Jacobians come from the variational (paraxial) system driven by
the Hessian of ``H``.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .errors import BranchAbsent, CausticEncountered, StepRejected
from .spectrum import SOLVERS

AXES = ("x1", "x2", "logk", "theta")
TWO_PI = 2.0 * np.pi
DEGREE = 5
MIN_SAMPLES = DEGREE + 1


def _branch_value(model, x, k, xi_hat, branch, solver, order):
    res = SOLVERS[solver](model, x, float(k), np.asarray(xi_hat, float), vectors=False, order=order)
    if len(res.eigenvalues) <= branch:
        return np.nan
    return float(res.eigenvalues[branch])


def _tensor_spline(grids, table, periodic):
    """Quintic interpolating tensor spline through ``table`` on ``grids``.

    Degree 5 keeps the Hessian of ``H`` twice differentiable between knots,
    which the variational equations need for RK4 to stay fourth order (a
    cubic leaves the Hessian piecewise linear and the tube Jacobian drops
    to second order).
    """
    c, knots = table, []
    for ax, (g, per) in enumerate(zip(grids, periodic)):
        sp = make_interp_spline(g, c, k=DEGREE, axis=ax, bc_type="periodic" if per else None)
        knots.append(sp.t)
        c = np.moveaxis(sp.c, 0, ax)
    return NdBSpline(tuple(knots), c, DEGREE)


@dataclass(frozen=True, eq=False)
class HamiltonianField:
    """Interpolated branch Hamiltonian ``sqrt(Lambda_branch)(x, xi)``.

    Attributes
    ----------
    axes : names of the retained axes, a subsequence of ``AXES``
    grids : sample positions per retained axis (``theta`` includes ``2 pi``)
    table : sampled ``g = log(sqrt(Lambda)/|xi|)``
    coverage : bool array over the requested grid; False where the branch
        is absent (at or above threshold)
    k_range : wavenumbers covered after removing absent samples
    cv_error : largest relative ``sqrt(Lambda)`` error at held-out probes
    """

    branch: int
    solver: str
    axes: tuple
    grids: tuple
    table: np.ndarray
    spline: NdBSpline = field(repr=False)
    box: tuple | None
    k_range: tuple
    coverage: np.ndarray = field(repr=False)
    cv_error: float = np.nan
    model_hash: str = ""
    x_ref: tuple = (0.0, 0.0)

    @property
    def lateral(self):
        return "x1" in self.axes or "x2" in self.axes

    def _point(self, x, xi):
        k = float(np.hypot(xi[0], xi[1]))
        full = {"x1": float(x[0]), "x2": float(x[1]), "logk": np.log(k),
                "theta": float(np.arctan2(xi[1], xi[0]) % TWO_PI)}
        return np.array([[full[a] for a in self.axes]]), k

    def contains(self, x, xi):
        k = float(np.hypot(xi[0], xi[1]))
        if not self.k_range[0] <= k <= self.k_range[1]:
            return False
        if self.box is not None:
            if "x1" in self.axes and not self.box[0] <= x[0] <= self.box[1]:
                return False
            if "x2" in self.axes and not self.box[2] <= x[1] <= self.box[3]:
                return False
        return True

    def _g(self, y, hessian):
        """``g`` with gradient and Hessian in the canonical ``AXES`` order."""
        n = len(self.axes)
        pos = [AXES.index(a) for a in self.axes]
        grad = np.zeros(4)
        hess = np.zeros((4, 4))
        g = float(self.spline(y)[0])
        for i in range(n):
            nu = [0] * n
            nu[i] = 1
            grad[pos[i]] = self.spline(y, nu=tuple(nu))[0]
        if hessian:
            for i, j in combinations_with_replacement(range(n), 2):
                nu = [0] * n
                nu[i] += 1
                nu[j] += 1
                hess[pos[i], pos[j]] = hess[pos[j], pos[i]] = self.spline(y, nu=tuple(nu))[0]
        return g, grad, hess

    def sqrt_lambda(self, x, xi):
        y, k = self._point(x, xi)
        return k * np.exp(float(self.spline(y)[0]))

    def Lambda(self, x, xi):
        return self.sqrt_lambda(x, xi) ** 2

    def derivatives(self, x, xi, hessian=False):
        """``H``, ``dH/dx``, ``dH/dxi`` and optionally the Hessian in ``(x1, x2, xi1, xi2)``.

        With ``F = log H = log|xi| + g(x, log|xi|, theta)`` the chain rule
        through ``(s, theta) = (log|xi|, atan2(xi2, xi1))`` gives the
        derivatives of ``F``; then ``dH = H dF`` and
        ``d2H = H (d2F + dF dF^T)``.
        """
        xi = np.asarray(xi, float)
        y, k = self._point(x, xi)
        g, gg, gh = self._g(y, hessian)
        H = k * np.exp(g)
        k2 = k * k
        # Jacobian of (x1, x2, s, theta) with respect to (x1, x2, xi1, xi2)
        J = np.zeros((4, 4))
        J[0, 0] = J[1, 1] = 1.0
        J[2, 2:] = xi / k2
        J[3, 2:] = np.array([-xi[1], xi[0]]) / k2
        dF_y = gg.copy()
        dF_y[2] += 1.0
        dF = J.T @ dF_y
        Hx, Hxi = H * dF[:2], H * dF[2:]
        if not hessian:
            return H, Hx, Hxi
        a, b = xi
        ds2 = np.array([[k2 - 2 * a * a, -2 * a * b], [-2 * a * b, k2 - 2 * b * b]]) / k2**2
        dth2 = np.array([[2 * a * b, b * b - a * a], [b * b - a * a, -2 * a * b]]) / k2**2
        d2F = J.T @ gh @ J
        d2F[2:, 2:] += dF_y[2] * ds2 + dF_y[3] * dth2
        return H, Hx, Hxi, H * (d2F + np.outer(dF, dF))

    def direct(self, model, x, xi):
        """``sqrt(Lambda)`` from a fresh spectral solve (for cross-validation)."""
        xi = np.asarray(xi, float)
        k = float(np.hypot(*xi))
        xq = tuple(x) if self.lateral else self.x_ref
        return np.sqrt(_branch_value(model, xq, k, xi / k, self.branch, self.solver, 4))


def build_hamiltonian(model, branch=0, box=None, k_range=(1.0, 10.0), n_k=8, n_x=(6, 6), n_theta=16,
                      solver="full", order=4, x=(0.0, 0.0), n_probe=3, seed=0):
    """Tabulate ``Lambda_branch`` and wrap it as a :class:`HamiltonianField`.

    Parameters
    ----------
    model : MaterialModel
    branch : int
        Index among the eigenvalues returned by ``solver`` (0 = lowest).
    box : (x1_min, x1_max, x2_min, x2_max), optional
        Lateral extent; defaults to the model's lateral grid.
    k_range, n_k : wavenumber interval and number of log-spaced samples (>= 6).
    n_x : lateral samples per axis (each >= 6 when that axis is kept).
    n_theta : direction samples on ``[0, 2 pi)`` (even, >= 6); ignored for
        models whose eigenvalues do not depend on the direction.
    solver : 'full', 'love' or 'rayleigh'
    x : surface point used for laterally homogeneous models.
    n_probe : held-out probe points for the cross-validation error.

    Raises
    ------
    BranchAbsent
        If no contiguous run of at least six wavenumber samples carries the
        branch at every lateral and direction sample.
    """
    if n_k < MIN_SAMPLES:
        raise ValueError(f"n_k must be >= {MIN_SAMPLES} for quintic interpolation")
    axes, grids, periodic = [], [], []
    if not model.laterally_homogeneous:
        box = model.lateral_box() if box is None else tuple(float(b) for b in box)
        for name, arr, lo, hi, n in (("x1", model.x1, box[0], box[1], n_x[0]),
                                     ("x2", model.x2, box[2], box[3], n_x[1])):
            if len(arr) > 1 and hi > lo:
                if n < MIN_SAMPLES:
                    raise ValueError(f"{name} needs >= {MIN_SAMPLES} samples")
                axes.append(name)
                grids.append(np.linspace(lo, hi, n))
                periodic.append(False)
    else:
        box = None
    lk = np.linspace(np.log(k_range[0]), np.log(k_range[1]), n_k)
    axes.append("logk")
    grids.append(lk)
    periodic.append(False)
    if model.symmetry not in ("isotropic", "transversely_isotropic"):
        if n_theta < MIN_SAMPLES or n_theta % 2:
            raise ValueError(f"n_theta must be even and >= {MIN_SAMPLES}")
        axes.append("theta")
        grids.append(np.linspace(0.0, TWO_PI, n_theta + 1))
        periodic.append(True)

    shape = tuple(len(g) - (1 if p else 0) for g, p in zip(grids, periodic))
    lam = np.empty(shape)
    for idx in np.ndindex(*shape):
        pt = dict(zip(axes, (grids[a][i] for a, i in enumerate(idx))))
        xq = (pt.get("x1", x[0]), pt.get("x2", x[1])) if box is not None else tuple(x)
        th = pt.get("theta", 0.0)
        lam[idx] = _branch_value(model, xq, np.exp(pt["logk"]), (np.cos(th), np.sin(th)),
                                 branch, solver, order)
    coverage = np.isfinite(lam)
    ka = axes.index("logk")
    ok_k = np.all(np.moveaxis(coverage, ka, -1).reshape(-1, n_k), axis=0)
    runs, start = [], None
    for i, ok in enumerate(list(ok_k) + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i))
            start = None
    runs = [r for r in runs if r[1] - r[0] >= MIN_SAMPLES]
    if not runs:
        raise BranchAbsent(f"branch {branch} is not present on {MIN_SAMPLES} consecutive wavenumbers "
                           f"across the box (coverage {coverage.mean():.0%})")
    lo, hi = max(runs, key=lambda r: r[1] - r[0])
    if (lo, hi) != (0, n_k):
        warnings.warn(f"branch {branch} covers only k in [{np.exp(lk[lo]):.4g}, {np.exp(lk[hi - 1]):.4g}]; "
                      "field restricted to that range", stacklevel=2)
    lam = np.take(lam, np.arange(lo, hi), axis=ka)
    grids[ka] = lk[lo:hi]
    kk = np.exp(grids[ka]).reshape([-1 if a == ka else 1 for a in range(len(axes))])
    table = 0.5 * np.log(lam) - np.log(kk)
    if "theta" in axes:
        table = np.concatenate([table, table[..., :1]], axis=-1)
    spline = _tensor_spline(grids, table, periodic)
    fld = HamiltonianField(branch, solver, tuple(axes), tuple(grids), table, spline, box,
                           (float(np.exp(grids[ka][0])), float(np.exp(grids[ka][-1]))), coverage,
                           np.nan, model.model_hash, tuple(x))
    cv = cross_validate(fld, model, n_probe, seed) if n_probe else np.nan
    object.__setattr__(fld, "cv_error", cv)
    if cv > 1e-3:
        warnings.warn(f"interpolation error {cv:.2e} at held-out probes exceeds 1e-3; refine the grids",
                      stacklevel=2)
    return fld


def cross_validate(fld, model, n_probe=3, seed=0):
    """Largest relative ``sqrt(Lambda)`` mismatch at random cell-centre probes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probe):
        pt = {}
        for a, g in zip(fld.axes, fld.grids):
            i = rng.integers(0, len(g) - 1)
            pt[a] = 0.5 * (g[i] + g[i + 1])
        xq = (pt.get("x1", fld.x_ref[0]), pt.get("x2", fld.x_ref[1]))
        k = np.exp(pt["logk"])
        th = pt.get("theta", 0.0)
        xi = k * np.array([np.cos(th), np.sin(th)])
        ref = fld.direct(model, xq, xi)
        worst = max(worst, abs(fld.sqrt_lambda(xq, xi) / ref - 1.0))
    return float(worst)


def group_and_phase_velocity(fld, x, xi):
    """Group velocity ``dH/dxi`` (2-vector) and phase velocity ``H / |xi|``."""
    H, _, Hxi = fld.derivatives(x, xi)
    return Hxi, H / float(np.hypot(*xi))


@dataclass
class RayState:
    t: float
    x: np.ndarray
    xi: np.ndarray
    phase: float
    tau: float
    J: np.ndarray | None = None
    A0: float = np.nan
    flags: tuple = ()


class _Exit(Exception):
    pass


def _rhs(fld, u, jac):
    x, xi = u[0:2], u[2:4]
    if not fld.contains(x, xi):
        raise _Exit
    if jac is None:
        H, Hx, Hxi = fld.derivatives(x, xi)
    else:
        H, Hx, Hxi, D2 = fld.derivatives(x, xi, hessian=True)
    du = np.empty_like(u)
    du[0:2] = Hxi
    du[2:4] = -Hx
    du[4] = xi @ Hxi
    if jac is not None:
        A = np.block([[D2[2:, :2], D2[2:, 2:]], [-D2[:2, :2], -D2[:2, 2:]]])
        du[5:] = (A @ u[5:].reshape(4, 2)).ravel()
    return du


def _rk4(fld, u, dt, jac):
    k1 = _rhs(fld, u, jac)
    k2 = _rhs(fld, u + 0.5 * dt * k1, jac)
    k3 = _rhs(fld, u + 0.5 * dt * k2, jac)
    k4 = _rhs(fld, u + dt * k3, jac)
    return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _tube(fld, u, jac):
    """2x2 ray-tube matrix from the state vector."""
    W = u[5:].reshape(4, 2)
    if jac == "plane":
        return W[:2, :].copy()
    _, _, Hxi = fld.derivatives(u[:2], u[2:4])
    return np.column_stack([Hxi, W[:2, 1]])


def trace_ray(fld, y, eta, t_max, dt=None, jacobian=None, adaptive=True, rtol=1e-11, dt_min=None,
              raise_on_caustic=False, max_steps=100000):
    """Integrate one bicharacteristic with classical RK4.

    Parameters
    ----------
    fld : HamiltonianField
    y, eta : start point and start wavevector
    t_max : final time
    dt : initial (adaptive) or fixed step; defaults to ``t_max / 100``
    jacobian : None, 'point' or 'plane'
        'point' follows a point-source fan parametrized by the take-off angle
        (``J = [dx/dt, dx/dtheta0]``); 'plane' follows a parallel fan
        (``J = dx/dy`` with ``eta`` fixed).
    adaptive : step-doubling error control (local tolerance ``rtol``) when True,
        fixed steps otherwise.

    Returns
    -------
    list of RayState
        The last state carries the flag ``'exit'`` if the ray left the field
        domain before ``t_max``.
    """
    if jacobian not in (None, "point", "plane"):
        raise ValueError("jacobian must be None, 'point' or 'plane'")
    y = np.asarray(y, float)
    eta = np.asarray(eta, float)
    if not fld.contains(y, eta):
        raise ValueError("start point outside the field domain")
    dt = t_max / 100.0 if dt is None else float(dt)
    dt_min = 1e-12 * t_max if dt_min is None else dt_min
    W0 = np.zeros((4, 2))
    if jacobian == "plane":
        W0[:2, :] = np.eye(2)
    elif jacobian == "point":
        W0[2:, 1] = np.array([-eta[1], eta[0]])
    u = np.concatenate([y, eta, [0.0], W0.ravel()])
    jac = jacobian
    states = [_state(fld, 0.0, u, jac)]
    t, steps = 0.0, 0
    nstate = 4 + (8 if jac else 0)
    sel = np.r_[0:4, 5:5 + (8 if jac else 0)]
    while t < t_max * (1 - 1e-14):
        if steps >= max_steps:
            raise StepRejected(f"step budget {max_steps} exhausted at t = {t}")
        h = min(dt, t_max - t)
        try:
            full = _rk4(fld, u, h, jac)
            if adaptive:
                half = _rk4(fld, _rk4(fld, u, 0.5 * h, jac), 0.5 * h, jac)
        except _Exit:
            if h <= dt_min or h < 1e-9 * t_max:
                states[-1].flags += ("exit",)
                break
            dt = 0.5 * h
            continue
        steps += 1
        if adaptive:
            scale = rtol * (1.0 + np.abs(u[sel]))
            err = float(np.max(np.abs(half[sel] - full[sel]) / 15.0 / scale)) if nstate else 0.0
            if err > 1.0:
                dt = h * max(0.2, 0.9 * err ** -0.2)
                if dt < dt_min:
                    raise StepRejected(f"step {dt:.3e} below floor {dt_min:.3e} at t = {t}")
                continue
            u = half
            dt = h * min(2.0, max(0.2, 0.9 * (err + 1e-30) ** -0.2)) if h == dt else dt
        else:
            u = full
        t += h
        states.append(_state(fld, t, u, jac))
    _amplitudes(states, jac, raise_on_caustic)
    return states


def _state(fld, t, u, jac):
    J = _tube(fld, u, jac) if jac else None
    return RayState(float(t), u[0:2].copy(), u[2:4].copy(), float(u[4]), float(t), J)


def _amplitudes(states, jac, raise_on_caustic):
    if jac is None:
        return
    dets = np.array([np.linalg.det(s.J) for s in states])
    ref = 1.0 if jac == "plane" else abs(dets[1]) if len(dets) > 1 else 1.0
    caustic = False
    for j, s in enumerate(states):
        if j > 0 and not caustic and (dets[j] == 0 or (j > 1 or jac == "plane") and
                                      np.sign(dets[j]) != np.sign(dets[j - 1])):
            caustic = True
            if raise_on_caustic:
                raise CausticEncountered(f"det J changes sign near t = {s.t}")
        if caustic:
            s.A0 = np.nan
            s.flags += ("caustic",)
        elif dets[j] == 0:
            s.A0 = np.inf
        else:
            s.A0 = float(np.sqrt(ref / abs(dets[j])))


def transport_amplitude(fld, ray):
    """Leading amplitudes ``A0(t) = sqrt(|det J_ref| / |det J(t)|)`` along a traced ray.

    For a parallel fan ``J(0) = I`` and ``A0(0) = 1``. For a point-source
    fan ``det J(0) = 0``; the normalization point is then the first step and
    ``A0(0)`` is infinite. Past a sign change of ``det J`` the amplitude is
    NaN (no caustic phase shift is applied).
    """
    if any(s.J is None for s in ray):
        raise ValueError("ray was traced without Jacobian propagation")
    return np.array([s.A0 for s in ray])


def trace_fan(fld, y, k, angles, t_max, **kw):
    """Rays from one point with wavevectors ``k (cos a, sin a)``."""
    return [trace_ray(fld, y, k * np.array([np.cos(a), np.sin(a)]), t_max, **kw) for a in angles]


def eikonal_phase(fld, rays, omega, rtol=1e-6):
    """Phase samples ``phi(x, omega)`` along rays launched on the level ``H = omega``.

    Returns ``(points, phase)`` stacked over all ray states. Each ray must
    start on the level set within ``rtol``.
    """
    pts, ph = [], []
    for ray in rays:
        H0 = fld.sqrt_lambda(ray[0].x, ray[0].xi)
        if abs(H0 - omega) > rtol * omega:
            raise ValueError(f"ray starts at H = {H0}, not on the level {omega}")
        pts.extend(s.x for s in ray)
        ph.extend(s.phase for s in ray)
    return np.array(pts), np.array(ph)


def field_to_arrays(fld):
    """Flat array dict for ``np.savez``; inverse of :func:`field_from_arrays`."""
    out = {"axes": np.array(fld.axes), "table": fld.table, "coverage": fld.coverage,
           "meta": np.array([fld.branch, fld.cv_error, *fld.k_range, *fld.x_ref]),
           "solver": np.array(fld.solver), "model_hash": np.array(fld.model_hash),
           "box": np.array(fld.box if fld.box is not None else [])}
    for a, g in zip(fld.axes, fld.grids):
        out["grid_" + a] = g
    return out


def field_from_arrays(d):
    axes = tuple(str(a) for a in d["axes"])
    grids = tuple(np.asarray(d["grid_" + a]) for a in axes)
    table = np.asarray(d["table"])
    spline = _tensor_spline(grids, table, [a == "theta" for a in axes])
    meta = np.asarray(d["meta"])
    box = tuple(float(b) for b in d["box"]) or None
    return HamiltonianField(int(meta[0]), str(d["solver"]), axes, grids, table, spline, box,
                            (float(meta[2]), float(meta[3])), np.asarray(d["coverage"]), float(meta[1]),
                            str(d["model_hash"]), (float(meta[4]), float(meta[5])))
