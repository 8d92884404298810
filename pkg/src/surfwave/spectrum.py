"""Discrete spectrum of the depth operator on a truncated half-line.

For a wavevector ``xi = k * xi_hat`` the depth operator acts on
3-component fields ``v(Z)`` through the Hermitian form

    a(v, w) = int  w'^H T v' - i k w^H R v' + i k w'^H R^T v + k^2 w^H Q v  dZ

with ``(T, R, Q)`` from :mod:`surfwave.acoustic`.  The traction-free
surface condition is natural for this form.  The half-line is cut at
``Z_min`` with a clamped wall and discretized by continuous Lagrange
elements on Gauss-Lobatto-Legendre nodes (order 1 is the usual linear
element with a lumped mass).  Eigenvalues come from a banded Hermitian
solver restricted to ``[0, threshold (1 - guard)]``; eigenvectors from
shifted inverse iteration on the same band.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre as L
from scipy.linalg import eig_banded, solve_banded

from .acoustic import limiting_velocity_triple, stroh_eigensystem, triple_from_voigt, AcousticTriple
from .errors import BranchLost, SymmetryMismatch, TruncationWarning

GUARD = 1e-3


@lru_cache(maxsize=16)
def gll(order):
    """GLL nodes, weights and differentiation matrix ``D[i, j] = l_j'(x_i)`` on [-1, 1]."""
    p = order
    if p < 1:
        raise ValueError("element order must be >= 1")
    inner = L.Legendre.basis(p).deriv().roots() if p > 1 else np.array([])
    x = np.concatenate([[-1.0], np.sort(inner.real), [1.0]])
    Pp = L.legval(x, np.eye(p + 1)[p])
    w = 2.0 / (p * (p + 1) * Pp**2)
    D = np.zeros((p + 1, p + 1))
    for i in range(p + 1):
        for j in range(p + 1):
            if i != j:
                D[i, j] = Pp[i] / (Pp[j] * (x[i] - x[j]))
    D[0, 0] = -p * (p + 1) / 4.0
    D[p, p] = p * (p + 1) / 4.0
    return x, w, D


@dataclass(frozen=True, eq=False)
class DepthGrid:
    """Element partition of ``[Z_min, 0]``; ``edges`` run from 0 down to ``Z_min``."""

    edges: np.ndarray
    order: int = 1

    @classmethod
    def uniform(cls, Z_min, n, order=1, Z_I=None):
        if n < 16:
            raise ValueError("a uniform grid needs n >= 16 cells")
        if Z_I is not None and not Z_min < Z_I:
            raise ValueError("Z_min must lie below Z_I")
        return cls(np.linspace(0.0, Z_min, n + 1), order)

    @property
    def Z_min(self):
        return float(self.edges[-1])

    @property
    def n(self):
        return len(self.edges) - 1

    @property
    def spacing(self):
        return abs(self.Z_min) / self.n

    @property
    def nodes(self):
        """Node depths, surface first, clamped wall last."""
        r, _, _ = gll(self.order)
        top, h = self.edges[:-1], -np.diff(self.edges)
        z = top[:, None] - 0.5 * (r[None, :] + 1.0) * h[:, None]
        return np.append(z[:, :-1].ravel(), self.edges[-1])

    @property
    def weights(self):
        """Lumped mass (quadrature weight) per node."""
        _, w, _ = gll(self.order)
        h = -np.diff(self.edges)
        m = np.zeros(self.n * self.order + 1)
        for a in range(self.order + 1):
            m[a::self.order][: self.n] += 0.5 * h * w[a]
        return m

    def deepened(self, factor):
        """Same elements plus extra tail elements (last size repeated) reaching ``factor * Z_min``."""
        target = factor * self.Z_min
        h = self.edges[-2] - self.edges[-1]
        extra = np.arange(1, int(np.ceil((self.edges[-1] - target) / h)) + 1)
        new = self.edges[-1] - h * extra
        new[-1] = target
        return DepthGrid(np.concatenate([self.edges, new]), self.order)


def frame(xi_hat):
    """Orthogonal symmetric matrix with columns ``(xi_hat, xi_perp, e3)``."""
    c, s = float(xi_hat[0]), float(xi_hat[1])
    return np.array([[c, s, 0.0], [s, -c, 0.0], [0.0, 0.0, 1.0]])


def _max_root_modulus(T, R, Q, velocities):
    trip = AcousticTriple(T, R, Q)
    return max(np.max(np.abs(stroh_eigensystem(trip, v)[0])) for v in velocities)


def threshold_velocity(profile, xi_hat):
    """``v_L`` of the tail, which fixes the bottom of the essential spectrum."""
    T, R, Q = triple_from_voigt(profile.tail, xi_hat)
    return limiting_velocity_triple(AcousticTriple(T, R, Q))


def adapted_grid(profile, xi_hat, k, order=4, nodes_per_wavelength=20, v_thr=None,
                 guard=GUARD, decay_lengths=20.0, grading=1.15, cap=2.5):
    """Element partition adapted to ``k`` and the model.

    Every piece above ``Z_I`` gets uniform elements giving at least
    ``nodes_per_wavelength`` nodes per shortest vertical wavelength (the
    largest sextic root modulus at the threshold speed).  The tail starts
    with the same rule, grows geometrically up to ``cap`` times that size,
    and extends ``decay_lengths`` slowest decay lengths below ``Z_I``.
    """
    if v_thr is None:
        v_thr = threshold_velocity(profile, xi_hat)
    edges = [0.0]
    vs = (0.0, v_thr)
    for j in range(profile.n_pieces - 1):
        z0, z1 = profile.Z[j], profile.Z[j + 1]
        zs = np.array([z0, 0.5 * (z0 + z1), z1])
        V = profile.evaluate_piece(zs, np.full(3, j))
        T, R, Q = triple_from_voigt(V, xi_hat)
        zmax = max(_max_root_modulus(T[i], R[i], Q[i], vs) for i in range(3))
        h = order * 2 * np.pi / (nodes_per_wavelength * k * max(zmax, 1e-12))
        n = max(2, int(np.ceil((z0 - z1) / h)))
        edges.extend(np.linspace(z0, z1, n + 1)[1:])
    T, R, Q = triple_from_voigt(profile.tail, xi_hat)
    tail = AcousticTriple(T, R, Q)
    v_edge = v_thr * np.sqrt(1.0 - guard)
    zmax = _max_root_modulus(T, R, Q, (0.0, 0.5 * v_edge, 0.9 * v_edge, v_edge))
    kappa = k * float(np.min(np.abs(stroh_eigensystem(tail, v_edge)[0][:3].imag)))
    h0 = order * 2 * np.pi / (nodes_per_wavelength * k * zmax)
    Z_min = profile.Z_I - decay_lengths / kappa
    z, h = profile.Z_I, h0
    while z - h > Z_min + 0.5 * h:
        z -= h
        edges.append(z)
        h = min(h * grading, cap * h0)
    edges.append(Z_min)
    return DepthGrid(np.array(edges), order)


@dataclass(eq=False)
class Assembly:
    """Pieces of the discrete problem ``K(k) x = Lambda M x`` with ``K = K0 + k K1 + k^2 K2``."""

    K0: sp.csr_matrix
    K1: sp.csr_matrix
    K2: sp.csr_matrix
    mass: np.ndarray
    k: float
    grid: DepthGrid
    nc: int
    coeffs: tuple

    @property
    def K(self):
        return (self.K0 + self.k * self.K1 + self.k**2 * self.K2).tocsr()

    def dK(self):
        return (self.K1 + 2.0 * self.k * self.K2).tocsr()

    def hermitian_defect(self):
        K = self.K
        scale = abs(K).max()
        return abs(K - K.conj().T).max() / scale


def _coefficients(profile, grid, xi_hat, rot, comps):
    r, _, _ = gll(grid.order)
    top, h = grid.edges[:-1], -np.diff(grid.edges)
    z = top[:, None] - 0.5 * (r[None, :] + 1.0) * h[:, None]
    mids = 0.5 * (grid.edges[:-1] + grid.edges[1:])
    piece = profile.piece_of(mids)
    V = np.empty(z.shape + (6, 6))
    upper = np.append(profile.Z, -np.inf)
    inside = (top <= profile.Z[np.minimum(piece, profile.n_pieces - 1)] + 1e-14 * h) & (
        grid.edges[1:] >= upper[piece + 1] - 1e-14 * h)
    inside |= piece == profile.n_pieces - 1
    if np.any(inside):
        zz = z[inside]
        V[inside] = profile.evaluate_piece(zz, np.repeat(piece[inside][:, None], z.shape[1], 1))
    if np.any(~inside):
        # element straddles a knot: fall back to pointwise values
        V[~inside] = profile.evaluate(z[~inside])
    T, R, Q = triple_from_voigt(V, xi_hat)
    ix = np.ix_(comps, comps)
    T = np.einsum("ai,...ij,jb->...ab", rot, T, rot)[(..., *ix)]
    R = np.einsum("ai,...ij,jb->...ab", rot, R, rot)[(..., *ix)]
    Q = np.einsum("ai,...ij,jb->...ab", rot, Q, rot)[(..., *ix)]
    return T, R, Q


def _scatter(blocks, grid, nc):
    n_el, p = grid.n, grid.order
    nb = (p + 1) * nc
    base = (np.arange(n_el) * p * nc)[:, None] + np.arange(nb)[None, :]
    rows = np.repeat(base[:, :, None], nb, axis=2)
    cols = np.repeat(base[:, None, :], nb, axis=1)
    N = (n_el * p + 1) * nc
    M = sp.coo_matrix((blocks.reshape(n_el, nb, nb).ravel(), (rows.ravel(), cols.ravel())), shape=(N, N))
    keep = N - nc
    return M.tocsr()[:keep, :keep]


def assemble(profile, xi_hat, k, grid, comps=(0, 1, 2), rot=None):
    """Assemble ``K0, K1, K2`` and the lumped mass for the selected components.

    ``rot`` maps to the computational frame (defaults to the identity);
    ``comps`` selects components in that frame.  The bottom node is
    clamped and removed.
    """
    rot = np.eye(3) if rot is None else rot
    comps = list(comps)
    nc = len(comps)
    T, R, Q = _coefficients(profile, grid, xi_hat, rot, comps)
    _, w, D = gll(grid.order)
    h = -np.diff(grid.edges)
    p1 = grid.order + 1
    K0 = np.einsum("q,qa,qb,eqij->eaibj", w, D, D, T) * (2.0 / h)[:, None, None, None, None]
    K1 = 1j * np.einsum("a,ab,eaij->eaibj", w, D, R) - 1j * np.einsum("b,ba,ebji->eaibj", w, D, R)
    K2 = np.zeros((grid.n, p1, nc, p1, nc))
    idx = np.arange(p1)
    K2[:, idx, :, idx, :] = np.moveaxis(np.einsum("a,eaij->eaij", w, Q) * (0.5 * h)[:, None, None, None], 0, 1)
    m_nodes = grid.weights
    mass = np.repeat(m_nodes[:-1], nc)
    return Assembly(_scatter(K0, grid, nc), _scatter(K1, grid, nc), _scatter(K2, grid, nc),
                    mass, float(k), grid, nc, (T, R, Q))


def dense_eigenvalues(asm):
    """Reference eigenvalues from a dense generalized solve (small problems only)."""
    from scipy.linalg import eigh
    return eigh(asm.K.toarray(), np.diag(asm.mass), eigvals_only=True)


def _to_band(A, u):
    """Upper band storage ``ab[u + i - j, j] = A[i, j]`` for ``i <= j``."""
    C = sp.triu(A).tocoo()
    ab = np.zeros((u + 1, A.shape[0]), dtype=A.dtype)
    ab[u + C.row - C.col, C.col] = C.data
    return ab


def _full_band(ab, u):
    N = ab.shape[1]
    full = np.zeros((2 * u + 1, N), dtype=ab.dtype)
    full[: u + 1] = ab
    for d in range(1, u + 1):
        full[u + d, : N - d] = np.conj(ab[u - d, d:])
    return full


def _phase_for_real(asm):
    """Per-component phases that make the pencil real, or ``None``."""
    nc = asm.nc
    for ph in (np.ones(nc), np.array([1.0] * (nc - 1) + [1j])):
        P = sp.diags(np.tile(ph, asm.mass.size // nc))
        B = (P.conj() @ asm.K @ P).tocsr()
        if B.nnz == 0 or abs(B.imag).max() <= 1e-14 * abs(B).max():
            return np.tile(ph, asm.mass.size // nc)
    return None


def solve_pencil(asm, upper, vectors=True, seed=0):
    """Eigenpairs of ``K x = Lambda M x`` with ``0 < Lambda <= upper``.

    Returns eigenvalues and M-orthonormal eigenvectors (columns).
    """
    K = asm.K
    s = 1.0 / np.sqrt(asm.mass)
    A = sp.diags(s) @ K @ sp.diags(s)
    phase = _phase_for_real(asm)
    if phase is not None:
        Pm = sp.diags(phase)
        A = (Pm.conj() @ A @ Pm).real.tocsr()
    u = (asm.grid.order + 1) * asm.nc - 1
    ab = _to_band(A.tocsr(), u)
    vals = eig_banded(ab, lower=False, eigvals_only=True, select="v", select_range=(0.0, upper),
                      check_finite=False)
    vals = np.sort(vals)
    if not vectors or len(vals) == 0:
        return vals, None
    full = _full_band(ab, u)
    rng = np.random.default_rng(seed)
    N = ab.shape[1]
    X = np.zeros((N, len(vals)), dtype=ab.dtype)
    scale = max(abs(vals).max(), 1.0)
    for j, lam in enumerate(vals):
        shifted = full.copy()
        shifted[u] -= lam + 1e-13 * scale
        near = [i for i in range(j) if abs(vals[i] - lam) <= 1e-5 * scale]
        x = rng.standard_normal(N).astype(ab.dtype)
        for _ in range(3):
            x = solve_banded((u, u), shifted, x, check_finite=False)
            for i in near:
                x -= X[:, i] * np.vdot(X[:, i], x)
            x /= np.linalg.norm(x)
        X[:, j] = x
    if phase is not None:
        X = X * phase[:, None]
    return vals, X * s[:, None]


@dataclass(eq=False)
class SpectralResult:
    """Discrete eigenvalues below the essential threshold and their modes.

    ``eigenfunctions`` has shape ``(n_modes, n_nodes, 3)`` in the original
    coordinate frame, including the clamped wall node (zero).
    """

    k: float
    xi_hat: tuple
    eigenvalues: np.ndarray
    threshold: float
    grid: DepthGrid
    polarization: tuple
    eigenfunctions: np.ndarray | None = None
    dlambda_dk: np.ndarray | None = None
    boundary_decay: np.ndarray | None = None
    truncation_suspect: np.ndarray | None = None
    boundary_residual: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def xi(self):
        return self.k * np.asarray(self.xi_hat)

    @property
    def phase_velocity(self):
        return np.sqrt(self.eigenvalues) / self.k

    @property
    def group_velocity(self):
        if self.dlambda_dk is None:
            return None
        return self.dlambda_dk / (2.0 * np.sqrt(self.eigenvalues))

    def gram(self):
        """Discrete L2 Gram matrix of the eigenfunctions."""
        w = self.grid.weights
        F = self.eigenfunctions
        return np.einsum("n,anc,bnc->ab", w, F.conj(), F)

    def multiplicity_clusters(self, rtol=1e-8):
        out, cur = [], [0]
        for j in range(1, len(self.eigenvalues)):
            if self.eigenvalues[j] - self.eigenvalues[j - 1] <= rtol * self.eigenvalues[j]:
                cur.append(j)
            else:
                out.append(tuple(cur))
                cur = [j]
        if len(self.eigenvalues):
            out.append(tuple(cur))
        return out


def _decay_fit(profile, xi_hat, k, nodes, amp, lam, Z_min):
    T, R, Q = triple_from_voigt(profile.tail, xi_hat)
    v = np.sqrt(lam) / k
    kappa = k * float(np.min(np.abs(stroh_eigensystem(AcousticTriple(T, R, Q), v)[0][:3].imag)))
    Z_I = profile.Z_I
    lo = max(Z_I - 18.0 / kappa, Z_min + 0.35 * (Z_I - Z_min))
    hi = Z_I - 6.0 / kappa
    sel = (nodes <= hi) & (nodes >= lo) & (amp > 1e-12 * amp.max())
    if sel.sum() < 3:
        return np.nan
    slope = np.polyfit(nodes[sel], np.log(amp[sel]), 1)[0]
    return float(slope)


def _solve(profile, xi_hat, k, grid, comps, rot, tags, threshold, guard, vectors, upper=None,
           warn=True, trunc_tol=1e-6):
    asm = assemble(profile, xi_hat, k, grid, comps, rot)
    top = threshold * (1.0 - guard) if upper is None else min(upper, threshold * (1.0 - guard))
    vals, X = solve_pencil(asm, top, vectors=vectors)
    nc = len(comps)
    pol = tuple(tags(X, nc) if X is not None else (tags(None, nc),) * len(vals))
    res = SpectralResult(float(k), tuple(float(c) for c in xi_hat[:2]), vals, float(threshold), grid, pol)
    if X is None:
        return res
    n_nodes = grid.n * grid.order + 1
    F = np.zeros((len(vals), n_nodes, 3), dtype=complex)
    Xr = X.T.reshape(len(vals), n_nodes - 1, nc)
    full = np.zeros((len(vals), n_nodes - 1, 3), dtype=complex)
    full[:, :, comps] = Xr
    F[:, :-1, :] = np.einsum("ij,anj->ani", rot.T, full)
    res.eigenfunctions = F
    dK = asm.dK()
    res.dlambda_dk = np.real(np.einsum("ia,ia->a", X.conj(), dK @ X))
    nodes = grid.nodes
    w = grid.weights
    amp = np.sqrt(np.sum(np.abs(F) ** 2, axis=2))
    deep = nodes < 0.9 * grid.Z_min
    mass_deep = np.sum(w[deep] * amp[:, deep] ** 2, axis=1)
    res.truncation_suspect = mass_deep > trunc_tol
    res.boundary_decay = np.array([_decay_fit(profile, xi_hat, k, nodes, amp[a], vals[a], grid.Z_min)
                                   for a in range(len(vals))])
    # traction T phi' + i k R^T phi at the surface, relative to its natural scale
    T0, R0, _ = (c[0, 0] for c in asm.coeffs)
    _, _, D = gll(grid.order)
    h0 = grid.edges[0] - grid.edges[1]
    loc = Xr[:, : grid.order + 1, :]
    dphi = -(2.0 / h0) * np.einsum("b,abc->ac", D[0], loc)
    trac = np.einsum("ij,aj->ai", T0, dphi) + 1j * k * np.einsum("ji,aj->ai", R0, loc[:, 0, :])
    scale = k * np.abs(T0).max() * np.abs(Xr).max(axis=(1, 2))
    res.boundary_residual = np.linalg.norm(trac, axis=1) / scale
    if warn and np.any(res.truncation_suspect):
        warnings.warn(f"{int(res.truncation_suspect.sum())} mode(s) carry mass near the truncation wall; "
                      "use a deeper Z_min", TruncationWarning, stacklevel=3)
    return res


def _full_tags(X, nc):
    if X is None:
        return "mixed"
    out = []
    for x in X.T:
        comp = np.abs(x.reshape(-1, nc)) ** 2
        share = comp.sum(axis=0) / comp.sum()
        out.append("love" if share[1] > 0.999 else ("rayleigh" if share[1] < 1e-3 else "mixed"))
    return out


def _prepare(model, x, xi_hat, k, grid, order, threshold):
    profile = model.column(x)
    xi_hat = np.asarray(xi_hat, dtype=float)
    if not k > 0:
        raise ValueError("|xi| must be positive")
    v_thr = threshold_velocity(profile, xi_hat)
    if grid is None:
        grid = adapted_grid(profile, xi_hat, k, order=order, v_thr=v_thr)
    if not grid.Z_min < profile.Z_I:
        raise ValueError("grid must extend below Z_I")
    thr = v_thr**2 * k**2 if threshold is None else threshold
    return profile, xi_hat, grid, thr


def discrete_spectrum(model, x, xi, grid=None, order=4, guard=GUARD, vectors=True, upper=None):
    """All eigenpairs of the full 3-component problem below ``threshold (1 - guard)``.

    Parameters
    ----------
    model : MaterialModel
    x : surface point
    xi : wavevector (2-vector); ``|xi|`` is the wavenumber
    grid : DepthGrid, optional
        Defaults to :func:`adapted_grid`.
    upper : float, optional
        Extra cap on the eigenvalues sought (used for counting).
    """
    xi = np.asarray(xi, dtype=float)
    k = float(np.hypot(xi[0], xi[1]))
    profile, xi_hat, grid, thr = _prepare(model, x, xi / k, k, grid, order, None)
    return _solve(profile, xi_hat, k, grid, (0, 1, 2), frame(xi_hat), _full_tags, thr, guard,
                  vectors, upper)


def _decoupled(model, x, xi_hat, k, grid, order, guard, vectors, polarization, allowed, upper=None):
    if model.symmetry not in allowed:
        raise SymmetryMismatch(f"{model.symmetry!r} model does not decouple for this solver")
    profile, xi_hat, grid, thr = _prepare(model, x, xi_hat, k, grid, order, None)
    rot = frame(xi_hat)
    # the coupling blocks must vanish at every knot for the split to be exact
    T, R, Q = triple_from_voigt(profile.voigt, xi_hat)
    for M in (T, R, Q):
        Mr = np.einsum("ai,kij,jb->kab", rot, M, rot)
        scale = np.abs(Mr).max()
        if max(np.abs(Mr[:, 1, [0, 2]]).max(), np.abs(Mr[:, [0, 2], 1]).max()) > 1e-12 * scale:
            raise SymmetryMismatch("coupling between SH and sagittal components does not vanish")
    out = {}
    if polarization in ("love", "both"):
        out["love"] = _solve(profile, xi_hat, k, grid, (1,), rot, lambda X, nc: "love", thr, guard,
                             vectors, upper)
    if polarization in ("rayleigh", "both"):
        out["rayleigh"] = _solve(profile, xi_hat, k, grid, (0, 2), rot, lambda X, nc: "rayleigh", thr,
                                 guard, vectors, upper)
    return out if polarization == "both" else out[polarization]


def love_spectrum(model, x, k, xi_hat=(1.0, 0.0), grid=None, order=4, guard=GUARD, vectors=True, upper=None):
    """SH (Love) modes of an isotropic model."""
    return _decoupled(model, x, xi_hat, k, grid, order, guard, vectors, "love", ("isotropic",), upper)


def rayleigh_spectrum(model, x, k, xi_hat=(1.0, 0.0), grid=None, order=4, guard=GUARD, vectors=True,
                      upper=None):
    """Sagittal (Rayleigh) modes of an isotropic model."""
    return _decoupled(model, x, xi_hat, k, grid, order, guard, vectors, "rayleigh", ("isotropic",), upper)


def ti_spectrum(model, x, k, xi_hat=(1.0, 0.0), polarization="both", grid=None, order=4, guard=GUARD,
                vectors=True, upper=None):
    """Love and/or Rayleigh modes of a transversely isotropic (vertical axis) model."""
    return _decoupled(model, x, xi_hat, k, grid, order, guard, vectors, polarization,
                      ("isotropic", "transversely_isotropic"), upper)


def monoclinic_spectrum(model, x, k, polarization="both", grid=None, order=4, guard=GUARD, vectors=True,
                        upper=None):
    """Modes of a model with the mirror symmetry ``x2 -> -x2``, propagating along ``x1``."""
    return _decoupled(model, x, (1.0, 0.0), k, grid, order, guard, vectors, polarization,
                      ("isotropic", "transversely_isotropic", "monoclinic_x2Z"), upper)


SOLVERS = {
    "full": lambda model, x, k, xi_hat, **kw: discrete_spectrum(model, x, k * np.asarray(xi_hat, float), **kw),
    "love": lambda model, x, k, xi_hat, **kw: ti_spectrum(model, x, k, xi_hat, "love", **kw),
    "rayleigh": lambda model, x, k, xi_hat, **kw: ti_spectrum(model, x, k, xi_hat, "rayleigh", **kw),
}


def counting_function(model, x, xi, E, solver="full", **kw):
    """Number of eigenvalues ``<= E |xi|^2`` (``E`` in velocity squared)."""
    xi = np.asarray(xi, dtype=float)
    k = float(np.hypot(*xi))
    profile = model.column(x)
    v_thr = threshold_velocity(profile, xi / k)
    if not E < v_thr**2:
        raise ValueError(f"E = {E} must lie below the threshold level {v_thr**2}")
    res = SOLVERS[solver](model, x, k, xi / k, vectors=False, upper=E * k * k, **kw)
    return int(np.sum(res.eigenvalues <= E * k * k))


def _interp_modes(prev_nodes, prev_F, nodes):
    out = np.zeros((prev_F.shape[0], len(nodes), 3), dtype=complex)
    order = np.argsort(prev_nodes)
    for c in range(3):
        for a in range(prev_F.shape[0]):
            f = prev_F[a, order, c]
            out[a, :, c] = np.interp(nodes, prev_nodes[order], f.real, left=0, right=0) + \
                1j * np.interp(nodes, prev_nodes[order], f.imag, left=0, right=0)
    return out


@dataclass
class DispersionCurve:
    branch: int
    k: np.ndarray
    Lambda: np.ndarray
    phase_velocity: np.ndarray
    group_velocity: np.ndarray
    overlap: np.ndarray
    solver: str = "full"

    def rows(self):
        return list(zip(self.k, self.Lambda, self.phase_velocity, self.group_velocity))


def dispersion_curve(model, x, xi_hat, k_list, branch=0, solver="full", order=4, min_overlap=0.5, **kw):
    """Follow one branch through ``k_list`` by eigenfunction overlap.

    Group velocity comes from the Hellmann-Feynman derivative
    ``dLambda/dk = <phi, (K1 + 2 k K2) phi>`` divided by ``2 sqrt(Lambda)``.
    """
    k_list = np.asarray(k_list, dtype=float)
    if np.any(np.diff(k_list) <= 0) or np.any(k_list <= 0):
        raise ValueError("k_list must be positive and increasing")
    lam, vp, vg, ov = [], [], [], []
    prev = None
    for j, k in enumerate(k_list):
        res = SOLVERS[solver](model, x, k, xi_hat, order=order, **kw)
        n = len(res.eigenvalues)
        if prev is None:
            if branch >= n:
                raise BranchLost(f"branch {branch} absent at k = {k} ({n} modes below threshold)")
            idx, score = branch, 1.0
        else:
            if n == 0:
                raise BranchLost(f"no modes left at k = {k}")
            guess = _interp_modes(prev[0], prev[1][None], res.grid.nodes)[0]
            w = res.grid.weights
            ng = np.sqrt(np.sum(w[:, None] * np.abs(guess) ** 2))
            scores = np.abs(np.einsum("n,nc,anc->a", w, guess.conj(), res.eigenfunctions)) / ng
            best = np.flatnonzero(scores >= scores.max() - 1e-6)
            idx = int(best[np.argmin(np.abs(res.eigenvalues[best] - lam[-1]))])
            score = float(scores[idx])
            if score < min_overlap:
                raise BranchLost(f"overlap {score:.3f} < {min_overlap} at k = {k}")
        lam.append(res.eigenvalues[idx])
        vp.append(res.phase_velocity[idx])
        vg.append(res.group_velocity[idx])
        ov.append(score)
        prev = (res.grid.nodes, res.eigenfunctions[idx])
    return DispersionCurve(branch, k_list, np.array(lam), np.array(vp), np.array(vg), np.array(ov), solver)


def group_velocity_fd(model, x, xi_hat, k, branch=0, solver="full", rel_step=1e-4, order=4, grid=None):
    """Central difference of ``sqrt(Lambda_branch)`` in ``k`` on a fixed grid."""
    profile = model.column(x)
    if grid is None:
        grid = adapted_grid(profile, np.asarray(xi_hat, float), k, order=order)
    dk = rel_step * k
    vals = []
    for kk in (k - dk, k + dk):
        res = SOLVERS[solver](model, x, kk, xi_hat, grid=grid, vectors=False)
        vals.append(np.sqrt(res.eigenvalues[branch]))
    return (vals[1] - vals[0]) / (2 * dk)
