"""Pointwise acoustic matrices, the sextic, and the limiting velocity.

For a unit surface direction ``xi_hat`` the matrices

    T_il = C_i33l,   R_il = sum_j C_ij3l xi_j,   Q_il = sum_jk C_ijkl xi_j xi_k

generate the depth symbol ``T zeta^2 + (R + R^T) zeta + Q``.  Rotating the
pair ``(xi_hat, e3)`` by an angle ``rho`` and subtracting ``v^2`` along the
propagation direction gives the family ``T(rho; v), R(rho; v), Q(rho; v)``;
the limiting velocity is the smallest ``v`` where some ``Q(rho; v)`` becomes
singular.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError
from .model import voigt_to_tensor


@dataclass(frozen=True)
class AcousticTriple:
    """``T``, ``R``, ``Q`` at one point; ``at`` records ``(x, xi_hat, Z)`` when known."""

    T: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    at: tuple | None = None

    def symbol(self, zeta):
        """Depth symbol ``T zeta^2 + (R + R^T) zeta + Q`` (broadcasts over ``zeta``)."""
        z = np.asarray(zeta)[..., None, None]
        return self.T * z**2 + (self.R + self.R.T) * z + self.Q

    def scaled(self, s2):
        return AcousticTriple(self.T * s2, self.R * s2, self.Q * s2, self.at)


def _unit(xi_hat):
    xi = np.zeros(3)
    xi[:2] = np.asarray(xi_hat, dtype=float)[:2]
    nrm = np.linalg.norm(xi)
    if not np.isclose(nrm, 1.0, rtol=0, atol=1e-12):
        raise ValueError(f"xi_hat must be a unit surface vector, |xi_hat| = {nrm}")
    return xi


def triple_from_voigt(voigt, xi_hat):
    """Stacked ``(T, R, Q)`` for one or many Voigt matrices."""
    xi = _unit(xi_hat)
    C = voigt_to_tensor(voigt)
    T = C[..., :, 2, 2, :]
    R = np.einsum("...ijl,j->...il", C[..., :, :, 2, :], xi)
    Q = np.einsum("...ijkl,j,k->...il", C, xi, xi)
    return T, R, Q


def acoustic_triple(model, x, xi_hat, Z):
    T, R, Q = triple_from_voigt(model.evaluate(x, Z), xi_hat)
    return AcousticTriple(T, R, Q, (tuple(np.asarray(x, float)), tuple(_unit(xi_hat)[:2]), float(Z)))


def rotated_triple(triple, rho, v):
    """Triple for the rotated frame ``m = cos(rho) xi_hat + sin(rho) e3``, ``n = -sin(rho) xi_hat + cos(rho) e3``.

    The stiffness is shifted to ``C_ijkl - v^2 xi_j xi_k delta_il`` first.
    """
    c, s = np.cos(rho), np.sin(rho)
    T, R, Q = triple.T, triple.R, triple.Q
    eye = np.eye(3)
    v2 = v * v
    Qr = c * c * Q + c * s * (R + R.T) + s * s * T - v2 * c * c * eye
    Rr = -c * s * Q + c * c * R - s * s * R.T + c * s * T + v2 * c * s * eye
    Tr = s * s * Q - c * s * (R + R.T) + c * c * T - v2 * s * s * eye
    return AcousticTriple(Tr, Rr, Qr, triple.at)


def _qmin(triple, rho, v):
    """Smallest eigenvalue of ``Q(rho; v)``, vectorized over ``rho``."""
    rho = np.atleast_1d(rho)
    c, s = np.cos(rho)[:, None, None], np.sin(rho)[:, None, None]
    T, R, Q = triple.T, triple.R, triple.Q
    Qr = c * c * Q + c * s * (R + R.T) + s * s * T
    return np.linalg.eigvalsh(Qr)[:, 0] - v * v * np.cos(rho) ** 2


@dataclass(frozen=True)
class LimitingVelocity:
    v_L: float
    angles: tuple
    bracket: tuple
    iterations: int


def _scan_min(triple, v, grid, xatol):
    vals = _qmin(triple, grid, v)
    best = []
    n = len(grid)
    # local minima on the periodic grid (the endpoints coincide modulo pi)
    for i in range(n - 1):
        left = vals[i - 1] if i > 0 else vals[n - 2]
        if vals[i] <= left and vals[i] <= vals[i + 1]:
            best.append(i)
    out = []
    for i in best:
        lo, hi = grid[i] - (grid[1] - grid[0]), grid[i] + (grid[1] - grid[0])
        res = minimize_scalar(lambda r: _qmin(triple, r, v)[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol})
        r = float(res.x)
        fr = float(res.fun)
        if fr > vals[i]:
            r, fr = float(grid[i]), float(vals[i])
        out.append((fr, (r + np.pi / 2) % np.pi - np.pi / 2))
    out.sort()
    return out


def limiting_velocity_triple(triple, n_rho=181, rtol=1e-12, v_max=None, full=False):
    """Limiting velocity from a triple by bisection on ``min_rho lambda_min Q(rho; v)``.

    Parameters
    ----------
    triple : AcousticTriple
    n_rho : int
        Size of the coarse angle scan over ``[-pi/2, pi/2]``.
    rtol : float
        Relative bisection tolerance on ``v``.
    v_max : float, optional
        Upper bracket; defaults to twice the largest body-wave-like speed.
    full : bool
        Return a :class:`LimitingVelocity` with all minimizing angles.
    """
    grid = np.linspace(-np.pi / 2, np.pi / 2, n_rho)
    if v_max is None:
        top = max(np.max(np.diag(triple.Q)), np.max(np.diag(triple.T)))
        v_max = 2.0 * np.sqrt(top)
    lo, hi = 0.0, float(v_max)
    if _scan_min(triple, hi, grid, 1e-10)[0][0] > 0:
        raise ConvergenceError(f"no singular Q(rho; v) found below v_max = {v_max}")
    it = 0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        g = _scan_min(triple, mid, grid, 1e-9 * np.pi)[0][0]
        if g > 0:
            lo = mid
        else:
            hi = mid
        it += 1
        if it > 200:
            raise ConvergenceError("bisection on the limiting velocity did not converge")
    v_L = 0.5 * (lo + hi)
    if not full:
        return v_L
    mins = _scan_min(triple, v_L, grid, 1e-12)
    scale = max(np.abs(triple.Q).max(), np.abs(triple.T).max())
    angles = tuple(sorted(r for f, r in mins if f <= mins[0][0] + 1e-7 * scale))
    return LimitingVelocity(v_L, angles, (lo, hi), it)


def limiting_velocity(model, x, xi_hat, Z, **kw):
    """Limiting velocity ``v_L(x, xi_hat, Z)``; see :func:`limiting_velocity_triple`."""
    return limiting_velocity_triple(acoustic_triple(model, x, xi_hat, Z), **kw)


def limiting_velocity_direct(triple, n_p=2001):
    """Independent evaluation ``v_L^2 = min_p lambda_min(T p^2 + (R + R^T) p + Q)`` over real ``p``.

    Dividing ``Q(rho; 0)`` by ``cos(rho)^2`` and writing ``p = tan(rho)``
    turns the angle problem into a scan over the real line.
    """
    p = np.tan(np.linspace(-np.pi / 2, np.pi / 2, n_p)[1:-1])
    vals = np.linalg.eigvalsh(triple.symbol(p))[:, 0]
    i = int(np.argmin(vals))
    res = minimize_scalar(lambda q: np.linalg.eigvalsh(triple.symbol(q))[0],
                          bracket=(p[max(i - 1, 0)], p[i], p[min(i + 1, len(p) - 1)]))
    return float(np.sqrt(min(res.fun, vals[i])))


@dataclass(frozen=True)
class DepthMinimum:
    v_inf: float
    Z_at_min: float
    v_tail: float
    v_surface: float
    assumption_holds: bool
    surface_minimum: bool


def infimum_limiting_velocity(model, x, xi_hat, samples_per_piece=8, rtol=1e-9):
    """Minimize ``v_L`` over ``[Z_I, 0]`` and report the two depth conditions.

    ``assumption_holds`` is the strict inequality ``inf v_L < v_L(Z_I)``;
    ``surface_minimum`` says the minimum is attained at ``Z = 0``.
    """
    prof = model.column(x)
    cache = {}

    def vl(Z):
        key = float(Z)
        if key not in cache:
            cache[key] = limiting_velocity(model, x, xi_hat, key, rtol=rtol)
        return cache[key]

    cands = []
    for j in range(prof.n_pieces - 1):
        z0, z1 = prof.Z[j], prof.Z[j + 1]
        if prof.interpolation == "step":
            cands.append((vl(z0), z0))
            continue
        zs = np.linspace(z0, z1, samples_per_piece + 1)
        vals = [vl(z) for z in zs]
        cands.extend(zip(vals, zs))
        i = int(np.argmin(vals))
        if 0 < i < len(zs) - 1:
            res = minimize_scalar(vl, bounds=(zs[i + 1], zs[i - 1]), method="bounded",
                                  options={"xatol": 1e-10 * max(1.0, abs(z1))})
            cands.append((float(res.fun), float(res.x)))
    v_tail = vl(prof.Z_I)
    cands.append((v_tail, prof.Z_I))
    # shallowest depth wins ties
    v_inf = min(v for v, _ in cands)
    tol = 10 * rtol * v_inf
    Z_at = max(z for v, z in cands if v <= v_inf + tol)
    v_surf = vl(0.0)
    return DepthMinimum(v_inf, float(Z_at), v_tail, v_surf,
                        bool(v_inf < v_tail - tol), bool(v_surf <= v_inf + tol))


@dataclass(frozen=True)
class Sextic:
    """``det[T zeta^2 + (R + R^T) zeta + Q - v^2 I]`` with its six roots.

    ``coefficients`` are in increasing powers of ``zeta``; roots are sorted
    by imaginary part so ``roots[:3]`` are the lower ones when ``v < v_L``.
    """

    coefficients: np.ndarray
    roots: np.ndarray
    v: float

    def __call__(self, zeta):
        return P.polyval(zeta, self.coefficients)

    @property
    def scale(self):
        return float(np.abs(self.coefficients).max())

    @property
    def lower(self):
        return self.roots[:3]


def sextic_coefficients(triple, v):
    """Cofactor expansion of the 3x3 polynomial determinant."""
    S = triple.R + triple.R.T
    A = triple.Q - v * v * np.eye(3)
    m = [[np.array([A[i, j], S[i, j], triple.T[i, j]]) for j in range(3)] for i in range(3)]

    def minor(i, j, k, l):
        return P.polysub(P.polymul(m[i][k], m[j][l]), P.polymul(m[i][l], m[j][k]))

    det = P.polyadd(P.polyadd(P.polymul(m[0][0], minor(1, 2, 1, 2)),
                              -P.polymul(m[0][1], minor(1, 2, 0, 2))),
                    P.polymul(m[0][2], minor(1, 2, 0, 1)))
    out = np.zeros(7)
    out[: len(det)] = np.real(det)
    return out


def stroh_eigensystem(triple, v):
    """Roots and null vectors of ``T zeta^2 + (R + R^T) zeta + Q - v^2 I``.

    Solved through the block companion linearization, which keeps a
    semisimple double root (isotropic media) accurate to machine precision.
    Returns ``(roots, vectors)`` with ``vectors[:, k]`` the 3-vector for
    ``roots[k]``; both sorted by imaginary part.
    """
    Tinv = np.linalg.inv(triple.T)
    S = triple.R + triple.R.T
    A = triple.Q - v * v * np.eye(3)
    L = np.zeros((6, 6))
    L[:3, 3:] = np.eye(3)
    L[3:, :3] = -Tinv @ A
    L[3:, 3:] = -Tinv @ S
    w, V = np.linalg.eig(L)
    order = np.lexsort((w.real, w.imag))
    return w[order], V[:3, order]


def sextic(triple, v):
    """Sextic coefficients and roots with one guarded Newton polish per root."""
    coef = sextic_coefficients(triple, v)
    roots, _ = stroh_eigensystem(triple, v)
    dcoef = P.polyder(coef)
    polished = roots.copy()
    for k, z in enumerate(roots):
        f, df = P.polyval(z, coef), P.polyval(z, dcoef)
        if df != 0:
            zn = z - f / df
            if abs(P.polyval(zn, coef)) < abs(f):
                polished[k] = zn
    order = np.lexsort((polished.real, polished.imag))
    return Sextic(coef, polished[order], float(v))


def decay_rate(triple, v):
    """Slowest vertical decay ``min |Im zeta|`` over the lower roots at speed ``v``."""
    roots, _ = stroh_eigensystem(triple, v)
    return float(np.min(np.abs(roots[:3].imag)))
