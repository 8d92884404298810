"""Normal-mode catalogs of radially stratified bodies.

On a round sphere of scaled radius the surface Laplacian has eigenvalues
``l (l + 1)`` with multiplicity ``2 l + 1``. Separable solutions
``phi(Z, k) Y_lm(x)`` turn each degree into a flat depth problem at the
effective wavenumber ``k = eps sqrt(l (l + 1))``. Toroidal modes come from
the SH (Love) problem, spheroidal ones from the sagittal (Rayleigh) problem.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import SymmetryMismatch
from .spectrum import SOLVERS

TYPES = {"toroidal": "love", "spheroidal": "rayleigh"}


@dataclass(frozen=True)
class ModeEntry:
    type: str
    n: int
    l: int
    k: float
    omega: float
    degeneracy: int

    @property
    def label(self):
        return f"{self.n}{self.type[0].upper()}{self.l}"


def degree_wavenumber(l, epsilon, jeans=False):
    """``eps sqrt(l (l + 1))``, or the Jeans form ``eps (l + 1/2)``."""
    return float(epsilon * (l + 0.5)) if jeans else float(epsilon * np.sqrt(l * (l + 1.0)))


def mode_eigenvalues(model, k, mode_type, order=4):
    """Depth eigenvalues at wavenumber ``k`` through the shared spectral solver."""
    res = SOLVERS[TYPES[mode_type]](model, (0.0, 0.0), float(k), (1.0, 0.0), order=order, vectors=False)
    return res.eigenvalues


def mode_catalog(model, epsilon, l_range, n_max, types=("toroidal", "spheroidal"), jeans=False, order=4):
    """Frequencies ``omega = sqrt(Lambda_n(k_l))`` for every requested degree and overtone.

    Parameters
    ----------
    model : laterally homogeneous isotropic or transversely isotropic model
    epsilon : inverse scaled radius
    l_range : iterable of degrees (``l >= 1``; ``l = 0`` has ``k = 0``)
    n_max : largest overtone index kept
    jeans : use ``k = eps (l + 1/2)`` instead of ``eps sqrt(l (l + 1))``

    Returns
    -------
    list of ModeEntry, ordered by type, then ``l``, then ``n``. Overtones
    at or above the essential threshold are absent.
    """
    if model.symmetry not in ("isotropic", "transversely_isotropic"):
        raise SymmetryMismatch(f"mode catalogs need an isotropic or TI model, got {model.symmetry!r}")
    if not model.laterally_homogeneous:
        raise ValueError("mode catalogs need a laterally homogeneous model")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    out = []
    for mode_type in types:
        if mode_type not in TYPES:
            raise ValueError(f"type must be one of {tuple(TYPES)}")
        for l in l_range:
            l = int(l)
            if l < 1:
                raise ValueError("degrees start at l = 1")
            k = degree_wavenumber(l, epsilon, jeans)
            vals = mode_eigenvalues(model, k, mode_type, order)
            for n, lam in enumerate(vals[: n_max + 1]):
                out.append(ModeEntry(mode_type, n, l, k, float(np.sqrt(lam)), 2 * l + 1))
    return out


@dataclass
class QuantizationReport:
    """Level-set check of one frequency against the degree quantization.

    ``l_continuous`` solves ``k(l) = k(omega)``; ``omega_below`` and
    ``omega_above`` are the catalog frequencies at the neighbouring integer
    degrees and ``gap`` is their difference (positive for a discrete set).
    """

    omega: float
    k: float
    l_continuous: float
    l_below: int
    l_above: int
    omega_below: float
    omega_above: float
    gap: float
    level_residual: float
    catalog_residuals: np.ndarray | None = None


def _continuous_degree(k, epsilon, jeans):
    r = k / epsilon
    return r - 0.5 if jeans else 0.5 * (np.sqrt(1.0 + 4.0 * r * r) - 1.0)


def asymptotic_mode_solution(fld, omega, epsilon, catalog=None, model=None, jeans=False):
    """Quantize the level set ``sqrt(Lambda(k)) = omega`` of a radial field.

    Parameters
    ----------
    fld : HamiltonianField of a laterally homogeneous, direction-independent model
    omega : frequency inside the field's range
    epsilon : inverse scaled radius
    catalog : ModeEntry list, optional
        When given together with ``model``, each entry's residual
        ``|Lambda(k) - omega^2| / omega^2`` is recomputed by a direct solve.
    """
    if fld.lateral or "theta" in fld.axes:
        raise ValueError("the field must depend on |xi| only")

    def H(k):
        return fld.sqrt_lambda(fld.x_ref, (k, 0.0))

    k0, k1 = fld.k_range
    if not H(k0) <= omega <= H(k1):
        raise ValueError(f"omega outside [{H(k0)}, {H(k1)}] covered by the field")
    k = brentq(lambda q: H(q) - omega, k0, k1, xtol=1e-14 * k1, rtol=4 * np.finfo(float).eps)
    lc = _continuous_degree(k, epsilon, jeans)
    lo = max(1, int(np.floor(lc)))
    hi = lo + 1
    w_lo = H(degree_wavenumber(lo, epsilon, jeans))
    w_hi = H(degree_wavenumber(hi, epsilon, jeans))
    res = None
    if catalog is not None and model is not None:
        res = np.array([abs(mode_eigenvalues(model, e.k, e.type)[e.n] - e.omega**2) / e.omega**2
                        for e in catalog])
    return QuantizationReport(float(omega), float(k), float(lc), lo, hi, float(w_lo), float(w_hi),
                              float(w_hi - w_lo), abs(H(k) ** 2 - omega**2) / omega**2, res)
