"""Phase-space areas and Weyl-law checks for the depth operator.

The eigenvalue count below ``E |xi|^2`` grows like ``|xi| * area / (2 pi)``
where ``area`` is the measure of ``{(Z, zeta): c(Z, zeta) <= E}`` for each
branch ``c`` of the depth symbol ``T zeta^2 + (R + R^T) zeta + Q``.

Scalar branches of the form ``a(Z) zeta^2 + b(Z)`` have the closed-form
``zeta``-extent ``2 sqrt((E - b) / a)``.  For general branches the extent
at fixed ``Z`` is read off the real roots of
``det[T zeta^2 + (R + R^T) zeta + Q - E I]``: the number of branches below
``E`` only changes there.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import qmc

from .acoustic import AcousticTriple, sextic_coefficients, triple_from_voigt
from .spectrum import SOLVERS, frame, threshold_velocity

KINDS = ("love", "rayleigh", "anisotropic")


def branch_functions(model, x, xi_hat, Z, zeta):
    """Sorted eigenvalues of the depth symbol at ``(Z, zeta)``; broadcasts over both."""
    Z, zeta = np.broadcast_arrays(np.asarray(Z, float), np.asarray(zeta, float))
    T, R, Q = triple_from_voigt(model.evaluate(x, Z.ravel()), xi_hat)
    z = zeta.ravel()[:, None, None]
    sym = T * z**2 + (R + np.swapaxes(R, -1, -2)) * z + Q
    return np.linalg.eigvalsh(sym).reshape(Z.shape + (3,))


def _scalar_coeffs(voigt, xi_hat, kind):
    """``(a, b)`` pairs of the scalar branches ``a zeta^2 + b`` for Love/Rayleigh."""
    T, R, Q = triple_from_voigt(voigt, xi_hat)
    P = frame(xi_hat)
    T = np.einsum("ai,...ij,jb->...ab", P, T, P)
    Q = np.einsum("ai,...ij,jb->...ab", P, Q, P)
    if kind == "love":
        return [(T[..., 1, 1], Q[..., 1, 1])]
    # isotropic sagittal branches: shear mu (1 + zeta^2), compressional (lam + 2 mu)(1 + zeta^2)
    return [(T[..., 0, 0], Q[..., 2, 2]), (T[..., 2, 2], Q[..., 0, 0])]


def _extent_scalar(a, b, E):
    return 2.0 * np.sqrt(np.clip((E - b) / a, 0.0, None))


def _extent_general(voigt, xi_hat, E):
    """Per-branch ``zeta``-measure of ``{c_i <= E}`` at one depth."""
    T, R, Q = triple_from_voigt(voigt, xi_hat)
    trip = AcousticTriple(T, R, Q)
    coef = sextic_coefficients(trip, np.sqrt(E))
    r = np.roots(coef[::-1])
    scale = max(1.0, np.abs(r).max())
    real = np.sort(r[np.abs(r.imag) <= 1e-7 * scale].real)
    if len(real) == 0:
        return np.zeros(3)
    pts = np.unique(np.round(real, 14))
    mids = 0.5 * (pts[:-1] + pts[1:])
    if len(mids) == 0:
        return np.zeros(3)
    counts = np.sum(np.linalg.eigvalsh(trip.symbol(mids)) <= E, axis=1)
    widths = np.diff(pts)
    return np.array([np.sum(widths[counts >= i]) for i in (1, 2, 3)])


@dataclass
class PhaseSpaceVolume:
    E: float
    kind: str
    areas: np.ndarray
    labels: tuple
    flags: list = field(default_factory=list)

    @property
    def total(self):
        return float(np.sum(self.areas))


def _integrate_depth(profile, f, rel=1e-11):
    """``int_{Z_I}^0 f(Z) dZ`` piece by piece (tail contributes nothing below threshold)."""
    total = np.zeros_like(np.atleast_1d(f(profile.Z[0], 0)), dtype=float)
    for j in range(profile.n_pieces - 1):
        z0, z1 = profile.Z[j], profile.Z[j + 1]
        if profile.interpolation == "step":
            total += np.atleast_1d(f(0.5 * (z0 + z1), j)) * (z0 - z1)
            continue
        for i in range(len(total)):
            val, _ = quad(lambda z: np.atleast_1d(f(z, j))[i], z1, z0, epsabs=0, epsrel=rel, limit=200)
            total[i] += val
    return total


def phase_space_volume(model, x, xi_hat, E, kind="love"):
    """Per-branch areas ``|{(Z, zeta): c_i(Z, zeta) <= E}|``.

    ``kind='love'`` uses the SH scalar branch, ``'rayleigh'`` the shear and
    compressional scalar branches of an isotropic model, ``'anisotropic'``
    the three sorted eigenvalues of the full symbol.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    xi_hat = np.asarray(xi_hat, float)
    profile = model.column(x)
    flags = []
    if kind == "rayleigh" and model.symmetry != "isotropic":
        raise ValueError("the two-branch Rayleigh area needs an isotropic model")
    if kind in ("love", "rayleigh"):
        def f(z, j):
            V = profile.evaluate_piece(np.array([z]), np.array([j]))[0]
            return np.array([_extent_scalar(a, b, E) for a, b in _scalar_coeffs(V, xi_hat, kind)])
        labels = ("SH",) if kind == "love" else ("S", "P")
    else:
        def f(z, j):
            V = profile.evaluate_piece(np.array([z]), np.array([j]))[0]
            return _extent_general(V, xi_hat, E)
        labels = ("c1", "c2", "c3")
        gap = branch_gap(model, x, xi_hat)
        if gap < 1e-8:
            flags.append(f"branch degeneracy or crossing (min relative gap {gap:.1e}); "
                         "sorted branches are not smooth there")
    # the general extent has kinks where branches cross E, so quad is asked for less
    areas = _integrate_depth(profile, f, rel=1e-11 if kind != "anisotropic" else 1e-9)
    return PhaseSpaceVolume(float(E), kind, areas, labels, flags)


def branch_gap(model, x, xi_hat, nz=41, nzeta=81, zeta_max=4.0):
    """Smallest relative gap between consecutive sorted branches on a sample grid."""
    profile = model.column(x)
    Z = np.linspace(profile.Z_I, 0.0, nz)
    zeta = np.linspace(-zeta_max, zeta_max, nzeta)
    c = branch_functions(model, x, xi_hat, Z[:, None], zeta[None, :])
    gaps = np.diff(c, axis=-1) / c[..., -1:]
    return float(gaps.min())


def monte_carlo_area(model, x, xi_hat, E, kind="love", m=20, seed=0):
    """Scrambled-Sobol estimate of the total area (independent of the closed forms).

    Returns ``(estimate, box_area)``; ``2**m`` points are used.
    """
    xi_hat = np.asarray(xi_hat, float)
    profile = model.column(x)
    V = profile.voigt
    T, R, Q = triple_from_voigt(V, xi_hat)
    lo = np.min(np.linalg.eigvalsh(Q))
    tmin = np.min(np.linalg.eigvalsh(T))
    # branch >= tmin zeta^2 - |R + R^T| |zeta| + lo, so this box holds the whole set
    s = np.max(np.linalg.norm(R + np.swapaxes(R, -1, -2), 2, axis=(-2, -1)))
    zmax = 1.1 * (s + np.sqrt(s * s + 4 * tmin * max(E - lo, 0.0))) / (2 * tmin) + 1e-12
    depth = 1.1 * abs(profile.Z_I)
    sampler = qmc.Sobol(2, scramble=True, seed=seed)
    total, count = 0.0, 0
    pts = sampler.random_base2(m)
    for u in np.array_split(pts, max(1, len(pts) // 65536)):
        Z = -depth * u[:, 0]
        zeta = zmax * (2 * u[:, 1] - 1)
        if kind == "anisotropic":
            c = branch_functions(model, x, xi_hat, Z, zeta)
            total += np.sum(c <= E)
        else:
            Vs = profile.evaluate(Z)
            for a, b in _scalar_coeffs(Vs, xi_hat, kind):
                total += np.sum(a * zeta**2 + b <= E)
        count += len(Z)
    box = depth * 2 * zmax
    return box * total / count, box


@dataclass
class WeylRow:
    k: float
    N: int
    prediction: float
    rel_error: float


@dataclass
class WeylReport:
    E: float
    kind: str
    area: float
    rows: list
    decreasing: bool
    passed: bool
    flags: list


def error_decreasing(errs, rtol=1e-9):
    """Monotone non-increasing with an overall drop (exact ties allowed).

    Counts are integers, so on ``k`` grids related by integer factors the
    remainder can scale exactly with ``k`` and produce identical relative
    errors at consecutive samples.
    """
    errs = list(errs)
    if all(e == 0 for e in errs):
        return True
    steps = all(b <= a * (1 + rtol) for a, b in zip(errs[:-1], errs[1:]))
    return bool(steps and errs[-1] < errs[0])


def weyl_check(model, x, xi_hat, E, k_list, kind="love", bound=0.1, order=4):
    """Compare eigenvalue counts with ``k * area / (2 pi)`` over ``k_list``.

    Passes when the relative error is non-increasing over the last three
    samples, drops overall, and ends below ``bound``.
    """
    xi_hat = np.asarray(xi_hat, float)
    vol = phase_space_volume(model, x, xi_hat, E, kind)
    solver = {"love": "love", "rayleigh": "rayleigh", "anisotropic": "full"}[kind]
    v_thr = threshold_velocity(model.column(x), xi_hat)
    if kind == "rayleigh":
        limit = np.min(np.diagonal(model.column(x).tail)[3:])
        if not E < limit:
            raise ValueError("Rayleigh Weyl level must lie below the tail shear modulus")
    if not E < v_thr**2:
        raise ValueError("E must lie below the essential threshold")
    rows = []
    for k in k_list:
        res = SOLVERS[solver](model, x, float(k), xi_hat, vectors=False, upper=E * k * k, order=order)
        N = int(np.sum(res.eigenvalues <= E * k * k))
        pred = k * vol.total / (2 * np.pi)
        err = abs(N - pred) / N if N > 0 else (0.0 if pred < 1 else np.inf)
        rows.append(WeylRow(float(k), N, float(pred), float(err)))
    errs = [r.rel_error for r in rows]
    decreasing = error_decreasing(errs[-3:])
    passed = decreasing and errs[-1] < bound
    return WeylReport(float(E), kind, vol.total, rows, decreasing, passed, vol.flags)
