"""Root matrix, surface impedance and the subsonic secular root.

For ``0 <= v < v_L`` at the surface, the matrix polynomial
``M(zeta) = T zeta^2 + (R + R^T) zeta + Q - v^2 I`` factors as
``(zeta - S1^*) T (zeta - S1)`` with ``Spec(S1)`` in the open lower
half-plane.  ``S1`` is computed from contour integrals of ``M^{-1}`` around
the three lower roots.

Sign convention: the impedance returned here is ``Z = i (T S1 + R^T)``.
With the lower-half-plane root matrix this is the choice that makes
``Z(0)`` positive definite and ``dZ/dv`` negative definite; it satisfies
the Riccati identity ``(Z + i R) T^{-1} (Z - i R^T) = Q - v^2 I``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester
from scipy.optimize import minimize

from .acoustic import acoustic_triple, limiting_velocity_triple, stroh_eigensystem
from .errors import DegenerateRoots, ExtrapolationUnstable, NoRoot, SylvesterSingular


def _sqrtm_spd(T):
    w, U = np.linalg.eigh(T)
    return (U * np.sqrt(w)) @ U.T, (U / np.sqrt(w)) @ U.T


@dataclass(frozen=True)
class RootMatrix:
    S1: np.ndarray
    v: float
    roots: np.ndarray
    nodes: int
    margin: float
    factorization_residual: float
    at: tuple | None = None


def _contour_S1(triple, v, center, radius, n0=64, n_max=32768, rtol=1e-13):
    Th, Tih = _sqrtm_spd(triple.T)
    S = triple.R + triple.R.T
    A = triple.Q - v * v * np.eye(3)
    Tt, St, At = np.eye(3), Tih @ S @ Tih, Tih @ A @ Tih
    prev = None
    n = n0
    while True:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        e = np.exp(1j * th)
        z = center + radius * e
        Minv = np.linalg.inv(Tt * z[:, None, None] ** 2 + St * z[:, None, None] + At)
        dz = (1j * radius * e)[:, None, None]
        I0 = np.sum(Minv * dz, axis=0)
        I1 = np.sum(Minv * (z[:, None, None] * dz), axis=0)
        St1 = I1 @ np.linalg.inv(I0)
        if prev is not None and np.abs(St1 - prev).max() <= rtol * max(np.abs(St1).max(), 1.0):
            return Tih @ St1 @ Th, n
        if n >= n_max:
            raise DegenerateRoots(f"contour quadrature did not settle with {n} nodes (v too close to v_L?)")
        prev = St1
        n *= 2


def factorization_residual(triple, v, S1):
    """Coefficient-wise mismatch of ``M(zeta)`` and ``(zeta - S1^*) T (zeta - S1)``."""
    T = triple.T
    Sh = S1.conj().T
    c2 = T - T
    c1 = (triple.R + triple.R.T) - (-(Sh @ T) - T @ S1)
    c0 = (triple.Q - v * v * np.eye(3)) - Sh @ T @ S1
    scale = max(np.abs(T).max(), np.abs(triple.Q).max())
    return float(max(np.abs(c).max() for c in (c2, c1, c0)) / scale)


def _separating_circle(lower, upper):
    """Center minimizing ``max|lower - c| / min|upper - c|``; trapezoid error decays like its square root."""

    def ratio(p):
        c = p[0] + 1j * p[1]
        return np.log(np.abs(lower - c).max() + 1e-300) - np.log(np.abs(upper - c).min())

    c0 = lower.mean()
    if ratio([c0.real, c0.imag]) < np.log(0.5):
        return c0, float(np.abs(lower - c0).max()), float(np.abs(upper - c0).min())
    starts = [c0, 0.5 * (lower.real.min() + lower.real.max()) + 0.5j * lower.imag.min()]
    best = None
    for s0 in starts:
        res = minimize(ratio, [s0.real, s0.imag], method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 200})
        if best is None or res.fun < best.fun:
            best = res
    c = best.x[0] + 1j * best.x[1]
    if ratio([lower.mean().real, lower.mean().imag]) <= best.fun:
        c = lower.mean()
    return c, float(np.abs(lower - c).max()), float(np.abs(upper - c).min())


def root_matrix_triple(triple, v, sep_tol=1e-6):
    """``S1`` by contour quadrature around the three lower roots."""
    roots, _ = stroh_eigensystem(triple, v)
    lower, upper = roots[:3], roots[3:]
    scale = np.abs(roots).max()
    if lower.imag.max() > -sep_tol * scale or upper.imag.min() < sep_tol * scale:
        raise DegenerateRoots(f"lower roots touch the real axis at v = {v}")
    center, d_in, d_out = _separating_circle(lower, upper)
    if d_out <= d_in * (1 + sep_tol):
        raise DegenerateRoots(f"no circle separates lower and upper roots at v = {v}")
    radius = np.sqrt(d_in * d_out) if d_in > 1e-3 * d_out else 0.5 * d_out
    S1, n = _contour_S1(triple, v, center, radius)
    margin = -float(np.linalg.eigvals(S1).imag.max())
    return RootMatrix(S1, float(v), roots, n, margin, factorization_residual(triple, v, S1), triple.at)


def root_matrix_stroh(triple, v):
    """``S1 = A diag(zeta) A^{-1}`` from null vectors of the lower roots (verification route)."""
    roots, vecs = stroh_eigensystem(triple, v)
    A = vecs[:, :3]
    return A @ np.diag(roots[:3]) @ np.linalg.inv(A)


def root_matrix(model, x, xi_hat, v):
    """Root matrix at the surface ``Z = 0``; see :func:`root_matrix_triple`."""
    return root_matrix_triple(acoustic_triple(model, x, xi_hat, 0.0), v)


@dataclass(frozen=True)
class ImpedanceTensor:
    Z: np.ndarray
    v: float
    eigenvalues: np.ndarray
    root: RootMatrix
    riccati_residual: float
    hermitian_defect: float

    @property
    def det(self):
        return float(np.real(np.linalg.det(self.Z)))

    @property
    def trace_gap(self):
        """``(tr Z)^2 - tr(Z^2)``, twice the second elementary symmetric function."""
        return float(np.real(np.trace(self.Z) ** 2 - np.trace(self.Z @ self.Z)))


def impedance_triple(triple, v):
    rm = root_matrix_triple(triple, v)
    Z = 1j * (triple.T @ rm.S1 + triple.R.T)
    Tinv = np.linalg.inv(triple.T)
    ric = (Z + 1j * triple.R) @ Tinv @ (Z - 1j * triple.R.T) - (triple.Q - v * v * np.eye(3))
    nrmQ = np.linalg.norm(triple.Q, 2)
    herm = np.abs(Z - Z.conj().T).max() / np.abs(Z).max()
    w = np.linalg.eigvalsh(0.5 * (Z + Z.conj().T))
    return ImpedanceTensor(Z, float(v), w, rm, float(np.abs(ric).max() / nrmQ), float(herm))


def impedance(model, x, xi_hat, v):
    """Surface impedance tensor at speed ``v`` (surface values)."""
    return impedance_triple(acoustic_triple(model, x, xi_hat, 0.0), v)


def impedance_derivative_triple(triple, v, imp=None):
    imp = impedance_triple(triple, v) if imp is None else imp
    S1 = imp.root.S1
    A, B = 1j * S1.conj().T, -1j * S1
    gap = np.abs(np.linalg.eigvals(A)[:, None] + np.linalg.eigvals(B)[None, :]).min()
    if gap < 1e-12 * max(np.abs(S1).max(), 1.0):
        raise SylvesterSingular(f"Sylvester operator gap {gap:.2e}")
    return solve_sylvester(A, B, 2.0 * v * np.eye(3))


def impedance_derivative(model, x, xi_hat, v):
    """``dZ/dv`` from the Sylvester equation ``i S1^* X - i X S1 = 2 v I``."""
    return impedance_derivative_triple(acoustic_triple(model, x, xi_hat, 0.0), v)


def property_report(triple, v, fd_step=1e-5):
    """Numerical checks of the standard impedance properties at one speed."""
    imp = impedance_triple(triple, v)
    Zh = 0.5 * (imp.Z + imp.Z.conj().T)
    out = {
        "hermitian_defect": imp.hermitian_defect,
        "real_part_min_eig": float(np.linalg.eigvalsh(Zh.real)[0]),
        "nonpositive_count": int(np.sum(imp.eigenvalues <= 0)),
        "riccati_residual": imp.riccati_residual,
        "trace": float(np.real(np.trace(imp.Z))),
    }
    if v > 0:
        dZ = impedance_derivative_triple(triple, v, imp)
        h = fd_step * v
        fd = (impedance_triple(triple, v + h).Z - impedance_triple(triple, v - h).Z) / (2 * h)
        out["derivative_max_eig"] = float(np.linalg.eigvalsh(0.5 * (dZ + dZ.conj().T))[-1])
        out["derivative_fd_error"] = float(np.abs(dZ - fd).max() / np.abs(dZ).max())
    return out


def _neville_zero(s, y):
    """Diagonal of the Neville table extrapolating ``y(s)`` to ``s = 0``."""
    n = len(s)
    P = [list(y)]
    diag = [y[0]]
    for m in range(1, n):
        row = []
        prev = P[-1]
        for i in range(n - m):
            row.append((s[i + m] * prev[i] - s[i] * prev[i + 1]) / (s[i + m] - s[i]))
        P.append(row)
        diag.append(row[-1])
    return np.array(diag)


@dataclass(frozen=True)
class BarnettLothe:
    holds: bool
    limit_det: float
    limit_trace_gap: float
    det_error: float
    trace_gap_error: float
    v_L: float
    surface_minimum: bool | None = None


def barnett_lothe_triple(triple, j_range=(3, 12), rtol=1e-6, v_L=None):
    """Limits of ``det Z`` and the trace gap as ``v`` increases to ``v_L``.

    Samples ``v_j = v_L (1 - 2^-j)`` and extrapolates polynomially in
    ``s = sqrt(1 - v / v_L)``, the variable in which the impedance is
    analytic near the limiting velocity.
    """
    v_L = limiting_velocity_triple(triple) if v_L is None else v_L
    js = np.arange(j_range[0], j_range[1] + 1)
    s = 2.0 ** (-js / 2.0)
    dets, gaps = [], []
    for j in js:
        imp = impedance_triple(triple, v_L * (1 - 2.0 ** (-j)))
        dets.append(imp.det)
        gaps.append(imp.trace_gap)
    z0 = np.abs(impedance_triple(triple, 0.0).eigenvalues).max()
    out = []
    for vals, scale in ((dets, z0**3), (gaps, z0**2)):
        d = _neville_zero(s[::-1], np.array(vals)[::-1])
        # keep the low-order part of the table where rounding has not taken over
        diffs = np.abs(np.diff(d))
        m = int(np.argmin(diffs[1:])) + 2 if len(diffs) > 1 else 1
        est, err = d[m], diffs[m - 1]
        if err > rtol * scale:
            raise ExtrapolationUnstable(f"successive extrapolants differ by {err:.3e} (scale {scale:.3e})")
        out.append((float(est), float(err)))
    (ld, ed), (lg, eg) = out
    tol_d, tol_g = 10 * max(ed, 1e-12 * z0**3), 10 * max(eg, 1e-12 * z0**2)
    holds = (ld < -tol_d) or (lg < -tol_g)
    return BarnettLothe(bool(holds), ld, lg, ed, eg, float(v_L))


def barnett_lothe(model, x, xi_hat, **kw):
    """Generalized Barnett-Lothe test at the surface of ``model`` at ``x``."""
    from .acoustic import infimum_limiting_velocity
    res = barnett_lothe_triple(acoustic_triple(model, x, xi_hat, 0.0), **kw)
    surf = infimum_limiting_velocity(model, x, xi_hat).surface_minimum
    return BarnettLothe(res.holds, res.limit_det, res.limit_trace_gap, res.det_error,
                        res.trace_gap_error, res.v_L, surf)


@dataclass(frozen=True)
class SecularRoot:
    v0: float
    phi0: np.ndarray
    v_L: float
    bracket: tuple


def secular_root_triple(triple, rtol=1e-13, v_L=None, check=True):
    """First zero of the smallest impedance eigenvalue below ``v_L`` by bisection."""
    v_L = limiting_velocity_triple(triple) if v_L is None else v_L
    if check and not barnett_lothe_triple(triple, v_L=v_L).holds:
        raise NoRoot("generalized Barnett-Lothe condition fails; no subsonic surface wave")
    lo, hi = 0.0, None
    for j in range(3, 25):
        vj = v_L * (1 - 2.0 ** (-j))
        try:
            lam = impedance_triple(triple, vj).eigenvalues[0]
        except DegenerateRoots:
            break
        if lam <= 0:
            hi = vj
            break
        lo = vj
    if hi is None:
        raise NoRoot("smallest impedance eigenvalue stays positive up to the limiting velocity")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if impedance_triple(triple, mid).eigenvalues[0] > 0:
            lo = mid
        else:
            hi = mid
    v0 = 0.5 * (lo + hi)
    Z = impedance_triple(triple, v0).Z
    w, U = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    return SecularRoot(float(v0), U[:, 0], float(v_L), (lo, hi))


def secular_root(model, x, xi_hat, **kw):
    """Subsonic surface-wave speed ``v0`` with boundary polarization ``phi0``."""
    return secular_root_triple(acoustic_triple(model, x, xi_hat, 0.0), **kw)


def rayleigh_secular_speed(lam, mu, rtol=1e-15):
    """Classical isotropic surface-wave speed from the Rayleigh secular function (independent oracle)."""
    cs2, cp2 = mu, lam + 2 * mu

    def f(v):
        v2 = v * v
        return (2 - v2 / cs2) ** 2 - 4 * np.sqrt(1 - v2 / cp2) * np.sqrt(1 - v2 / cs2)

    lo, hi = 1e-6 * np.sqrt(cs2), np.sqrt(cs2) * (1 - 1e-15)
    # f > 0 near 0 only to second order; move lo up to where f is clearly negative
    vs = np.linspace(lo, hi, 2001)
    fv = f(vs)
    i = int(np.flatnonzero(np.sign(fv[:-1]) != np.sign(fv[1:]))[-1])
    a, b = vs[i], vs[i + 1]
    while b - a > rtol * b:
        m = 0.5 * (a + b)
        if np.sign(f(m)) == np.sign(f(a)):
            a = m
        else:
            b = m
    return 0.5 * (a + b)
