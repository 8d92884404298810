"""Density-normalized stiffness models of a stratified half-space.

Stiffnesses are stored as 6x6 Voigt matrices ``C = c / rho`` (units of
velocity squared) with the index map ``(11, 22, 33, 23, 13, 12) -> 0..5``.
No factor-of-two scaling is applied to the entries; the convexity test uses
the Mandel rescaling so that positive definiteness of the 6x6 matrix is the
same statement as positive definiteness of the strain-energy form.

Depth ``Z`` is the stretched coordinate, ``Z <= 0``, with the surface at
``Z = 0``.  Below ``Z_I`` every profile is constant.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomain, ParseError, ValidationError

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
VOIGT_INDEX = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2]])
SYMMETRIES = ("isotropic", "transversely_isotropic", "monoclinic_x2Z", "general")
INTERPOLATIONS = ("step", "linear")

_MANDEL = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])
# Voigt entries that vanish under the mirror x2 -> -x2 (odd count of index 2).
_MONOCLINIC_ZEROS = [(0, 3), (0, 5), (1, 3), (1, 5), (2, 3), (2, 5), (3, 4), (4, 5)]


def voigt_to_tensor(voigt):
    """Expand ``(..., 6, 6)`` Voigt matrices to ``(..., 3, 3, 3, 3)`` tensors."""
    voigt = np.asarray(voigt, dtype=float)
    return voigt[..., VOIGT_INDEX[:, :, None, None], VOIGT_INDEX[None, None, :, :]]


def tensor_to_voigt(tensor):
    tensor = np.asarray(tensor, dtype=float)
    out = np.empty(tensor.shape[:-4] + (6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            out[..., a, b] = tensor[..., i, j, k, l]
    return out


def isotropic_voigt(lam, mu):
    """Voigt matrix of an isotropic solid with Lame parameters ``lam``, ``mu``."""
    v = np.zeros((6, 6))
    v[:3, :3] = lam
    v[[0, 1, 2], [0, 1, 2]] = lam + 2.0 * mu
    v[[3, 4, 5], [3, 4, 5]] = mu
    return v


def ti_voigt(C11, C33, C44, C66, C13):
    """Voigt matrix of a transversely isotropic solid with vertical axis."""
    v = np.zeros((6, 6))
    C12 = C11 - 2.0 * C66
    v[0, 0] = v[1, 1] = C11
    v[2, 2] = C33
    v[0, 1] = v[1, 0] = C12
    v[0, 2] = v[2, 0] = v[1, 2] = v[2, 1] = C13
    v[3, 3] = v[4, 4] = C44
    v[5, 5] = C66
    return v


def rotate_voigt_z(voigt, angle):
    """Rotate a Voigt matrix about the vertical axis by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    C = voigt_to_tensor(voigt)
    C = np.einsum("ai,bj,ck,dl,ijkl->abcd", rot, rot, rot, rot, C)
    return tensor_to_voigt(C)


def mandel(voigt):
    """Mandel form ``S V S`` with ``S = diag(1, 1, 1, sqrt2, sqrt2, sqrt2)``."""
    voigt = np.asarray(voigt, dtype=float)
    return voigt * _MANDEL[:, None] * _MANDEL[None, :]


def convexity_margin(voigt):
    """Smallest eigenvalue of the Mandel form; positive iff strongly convex."""
    return np.linalg.eigvalsh(mandel(voigt))[..., 0]


def symmetry_defect(voigt, symmetry):
    """Relative deviation of ``voigt`` from the zero/equality pattern of ``symmetry``."""
    v = np.asarray(voigt, dtype=float)
    scale = max(np.abs(v).max(), 1e-300)
    if symmetry == "general":
        return 0.0
    if symmetry == "monoclinic_x2Z":
        return max(abs(v[a, b]) for a, b in _MONOCLINIC_ZEROS) / scale
    if symmetry == "transversely_isotropic":
        ref = ti_voigt(v[0, 0], v[2, 2], v[3, 3], v[5, 5], v[0, 2])
    elif symmetry == "isotropic":
        mu = v[3, 3]
        ref = isotropic_voigt(v[0, 0] - 2.0 * mu, mu)
    else:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    return np.abs(v - ref).max() / scale


@dataclass(frozen=True, eq=False)
class DepthProfile:
    """Piecewise depth profile of Voigt matrices with a constant tail.

    ``Z`` holds the knot depths from ``0`` down to ``Z_I`` (strictly
    decreasing, last entry exactly ``Z_I``); ``voigt[-1]`` is the tail value.
    Piece ``j`` is the interval ``[Z[j+1], Z[j]]``; the tail is piece
    ``len(Z) - 1``.  Step interpolation assigns the shallower knot's value
    to ``(Z[j+1], Z[j]]``.
    """

    Z: np.ndarray
    voigt: np.ndarray
    interpolation: str = "step"
    tail_ok: bool = True

    @property
    def Z_I(self):
        return float(self.Z[-1])

    @property
    def tail(self):
        return self.voigt[-1]

    @property
    def n_pieces(self):
        return len(self.Z)

    @classmethod
    def from_knots(cls, Z, voigt, interpolation, Z_I, strict=True, name="profile"):
        Z = np.asarray(Z, dtype=float)
        voigt = np.asarray(voigt, dtype=float)
        if interpolation not in INTERPOLATIONS:
            raise ParseError(f"interpolation must be one of {INTERPOLATIONS}, got {interpolation!r}")
        if Z.ndim != 1 or len(Z) == 0 or voigt.shape != (len(Z), 6, 6):
            raise ParseError(f"{name}: knots must carry 6x6 matrices")
        if Z[0] != 0.0:
            raise ValidationError("knots", f"{name} knot 0", "first knot must sit at Z = 0")
        if np.any(np.diff(Z) >= 0):
            bad = int(np.argmax(np.diff(Z) >= 0)) + 1
            raise ValidationError("knots", f"{name} knot {bad}", "depths must be strictly decreasing")
        if not Z_I < 0:
            raise ValidationError("tail", name, "Z_I must be negative")
        tail_ok = True
        if Z[-1] > Z_I:
            if strict:
                raise ValidationError("tail", f"{name} knot {len(Z) - 1}",
                                      f"deepest knot Z={Z[-1]} lies above Z_I={Z_I}")
            tail_ok = False
        tail = voigt[-1]
        scale = np.abs(tail).max()
        for j in np.flatnonzero(Z <= Z_I):
            if np.abs(voigt[j] - tail).max() > 1e-12 * scale:
                if strict:
                    raise ValidationError("tail", f"{name} knot {j}",
                                          "knots at or below Z_I must equal the tail value")
                tail_ok = False
        above = Z > Z_I
        Zs = list(Z[above])
        vs = list(voigt[above])
        if interpolation == "linear" and len(Zs) < len(Z) and Z_I not in Z:
            # the linear interpolant must already reach the tail value at Z_I
            j = len(Zs) - 1
            t = (Zs[j] - Z_I) / (Zs[j] - Z[j + 1])
            at_ZI = (1.0 - t) * voigt[j] + t * voigt[j + 1]
            if np.abs(at_ZI - tail).max() > 1e-12 * scale:
                if strict:
                    raise ValidationError("tail", f"{name} Z_I",
                                          "linear interpolant does not reach the tail value at Z_I")
                tail_ok = False
        Zs.append(Z_I)
        vs.append(tail)
        voigt_arr = np.array(vs)
        voigt_arr.setflags(write=False)
        Z_arr = np.array(Zs)
        Z_arr.setflags(write=False)
        return cls(Z_arr, voigt_arr, interpolation, tail_ok)

    def piece_of(self, Z):
        """Piece index of depth(s) ``Z`` (shallower-knot convention)."""
        Z = np.asarray(Z, dtype=float)
        asc = self.Z[::-1]
        idx = np.searchsorted(asc, Z, side="left")
        piece = len(self.Z) - 1 - idx
        return np.where(Z <= self.Z_I, len(self.Z) - 1, piece)

    def evaluate_piece(self, Z, piece):
        """Evaluate within a given piece; used to take one-sided limits at knots."""
        Z = np.asarray(Z, dtype=float)
        piece = np.broadcast_to(np.asarray(piece), Z.shape)
        out = np.empty(Z.shape + (6, 6))
        last = len(self.Z) - 1
        tail = piece >= last
        out[tail] = self.tail
        inner = ~tail
        if np.any(inner):
            j = piece[inner]
            if self.interpolation == "step":
                out[inner] = self.voigt[j]
            else:
                z0, z1 = self.Z[j], self.Z[j + 1]
                t = ((z0 - Z[inner]) / (z0 - z1))[:, None, None]
                out[inner] = (1.0 - t) * self.voigt[j] + t * self.voigt[j + 1]
        return out

    def evaluate(self, Z):
        Z_arr = np.asarray(Z, dtype=float)
        if np.any(Z_arr > 0.0):
            raise ValueError("depth must satisfy Z <= 0")
        out = self.evaluate_piece(Z_arr, self.piece_of(Z_arr))
        return out


@dataclass(frozen=True, eq=False)
class MaterialModel:
    """Validated stiffness field ``C(x, Z)`` with symmetry tag and tail."""

    symmetry: str
    Z_I: float
    interpolation: str
    delta: float
    profile: DepthProfile | None = None
    x1: np.ndarray | None = None
    x2: np.ndarray | None = None
    grid: tuple | None = None
    source: dict = field(default_factory=dict, repr=False)
    _columns: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def laterally_homogeneous(self):
        return self.grid is None

    def profiles(self):
        """Yield ``(name, DepthProfile)`` for every stored profile."""
        if self.grid is None:
            yield "profile", self.profile
        else:
            for i, row in enumerate(self.grid):
                for j, prof in enumerate(row):
                    yield f"profile[{i}][{j}]", prof

    @property
    def model_hash(self):
        blob = json.dumps(self.source, sort_keys=True, default=_jsonable).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def lateral_box(self):
        if self.grid is None:
            return None
        return (float(self.x1[0]), float(self.x1[-1]), float(self.x2[0]), float(self.x2[-1]))

    def column(self, x=(0.0, 0.0)):
        """Depth profile at surface point ``x`` (bilinear in the lateral grid)."""
        if self.grid is None:
            return self.profile
        key = (float(x[0]), float(x[1]))
        hit = self._columns.get(key)
        if hit is not None:
            return hit
        col = self._bilinear_column(key)
        if len(self._columns) > 4096:
            self._columns.clear()
        self._columns[key] = col
        return col

    def _bilinear_column(self, x):
        x1, x2 = self.x1, self.x2
        tol = 1e-12 * max(1.0, abs(x1[-1] - x1[0]), abs(x2[-1] - x2[0]))
        if not (x1[0] - tol <= x[0] <= x1[-1] + tol and x2[0] - tol <= x[1] <= x2[-1] + tol):
            raise OutOfDomain(f"x={x} outside lateral grid [{x1[0]}, {x1[-1]}] x [{x2[0]}, {x2[-1]}]")
        i = int(np.clip(np.searchsorted(x1, x[0], side="right") - 1, 0, len(x1) - 2)) if len(x1) > 1 else 0
        j = int(np.clip(np.searchsorted(x2, x[1], side="right") - 1, 0, len(x2) - 2)) if len(x2) > 1 else 0
        a = 0.0 if len(x1) == 1 else (x[0] - x1[i]) / (x1[i + 1] - x1[i])
        b = 0.0 if len(x2) == 1 else (x[1] - x2[j]) / (x2[j + 1] - x2[j])
        a, b = float(np.clip(a, 0, 1)), float(np.clip(b, 0, 1))
        corners = []
        for di, wa in ((0, 1.0 - a), (1, a)):
            for dj, wb in ((0, 1.0 - b), (1, b)):
                w = wa * wb
                if w == 0.0:
                    continue
                corners.append((w, self.grid[min(i + di, len(x1) - 1)][min(j + dj, len(x2) - 1)]))
        if len(corners) == 1:
            return corners[0][1]
        Zs = np.unique(np.concatenate([p.Z for _, p in corners]))[::-1]
        if self.interpolation == "linear":
            vs = sum(w * p.evaluate(Zs) for w, p in corners)
        else:
            mids = np.append(0.5 * (Zs[:-1] + Zs[1:]), Zs[-1])
            vs = sum(w * p.evaluate(mids) for w, p in corners)
        vs.setflags(write=False)
        Zs.setflags(write=False)
        return DepthProfile(Zs, vs, self.interpolation, all(p.tail_ok for _, p in corners))

    def evaluate(self, x, Z):
        """Voigt matrix (or stack of them) at surface point ``x`` and depth ``Z``."""
        return self.column(x).evaluate(Z)

    def tensor(self, x, Z):
        return voigt_to_tensor(self.evaluate(x, Z))

    def max_wave_speed(self):
        """Largest sqrt of a Voigt diagonal entry over all knots."""
        top = max(np.max(np.diagonal(p.voigt, axis1=1, axis2=2)) for _, p in self.profiles())
        return float(np.sqrt(top))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _parse_stiffness(spec, where):
    if isinstance(spec, dict):
        keys = set(spec)
        if {"lambda", "mu"} <= keys:
            return isotropic_voigt(float(spec["lambda"]), float(spec["mu"]))
        if {"C11", "C33", "C44", "C66", "C13"} <= keys:
            return ti_voigt(*(float(spec[k]) for k in ("C11", "C33", "C44", "C66", "C13")))
        raise ParseError(f"{where}: stiffness object needs lambda/mu or C11,C33,C44,C66,C13")
    try:
        arr = np.array(spec, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: stiffness is not numeric") from exc
    if arr.shape != (6, 6):
        raise ParseError(f"{where}: stiffness matrix must be 6x6, got {arr.shape}")
    return arr


def _parse_profile(knots, interpolation, Z_I, strict, name):
    if not isinstance(knots, list) or not knots:
        raise ParseError(f"{name}: 'knots' must be a non-empty list")
    Zs, vs = [], []
    for n, knot in enumerate(knots):
        where = f"{name} knot {n}"
        if not isinstance(knot, dict) or "Z" not in knot or "c" not in knot:
            raise ParseError(f"{where}: each knot needs 'Z' and 'c'")
        rho = float(knot.get("rho", 1.0))
        if not rho > 0:
            raise ValidationError("knots", where, "density must be positive")
        v = _parse_stiffness(knot["c"], where) / rho
        if np.abs(v - v.T).max() > 1e-12 * max(np.abs(v).max(), 1e-300):
            if strict:
                raise ValidationError("symmetry", where, "Voigt matrix is not symmetric")
        Zs.append(float(knot["Z"]))
        vs.append(v)
    return DepthProfile.from_knots(Zs, vs, interpolation, Z_I, strict=strict, name=name)


def model_from_dict(data, check=True):
    """Build a :class:`MaterialModel` from the JSON model structure.

    With ``check=True`` every invariant is enforced and the first violation
    raises :class:`ValidationError`.  With ``check=False`` only structural
    parse errors raise; call :func:`validate` for a full report.
    """
    if not isinstance(data, dict):
        raise ParseError("model must be a JSON object")
    try:
        symmetry = data["symmetry"]
        Z_I = float(data["Z_I"])
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from exc
    if symmetry not in SYMMETRIES:
        raise ParseError(f"symmetry must be one of {SYMMETRIES}, got {symmetry!r}")
    interpolation = data.get("interpolation", "step")
    if "lateral" in data:
        lat = data["lateral"]
        named = data.get("profiles")
        if not isinstance(named, dict):
            raise ParseError("lateral models need a 'profiles' mapping name -> {knots: [...]}")
        built = {}
        for name, prof in named.items():
            knots = prof.get("knots") if isinstance(prof, dict) else prof
            built[name] = _parse_profile(knots, interpolation, Z_I, check, f"profile {name!r}")
        try:
            x1 = np.array(lat["x1"], dtype=float)
            x2 = np.array(lat["x2"], dtype=float)
            refs = lat["profiles"]
            grid = tuple(tuple(built[r] for r in row) for row in refs)
        except KeyError as exc:
            raise ParseError(f"lateral grid references unknown profile or field {exc}") from exc
        if len(grid) != len(x1) or any(len(row) != len(x2) for row in grid):
            raise ParseError("lateral profiles must form a len(x1) x len(x2) array")
        if np.any(np.diff(x1) <= 0) or np.any(np.diff(x2) <= 0):
            raise ParseError("lateral coordinates must be strictly increasing")
        x1.setflags(write=False)
        x2.setflags(write=False)
        profile = None
    else:
        if "knots" not in data:
            raise ParseError("missing field 'knots'")
        profile = _parse_profile(data["knots"], interpolation, Z_I, check, "profile")
        x1 = x2 = grid = None
    stored = [profile] if grid is None else [p for row in grid for p in row]
    largest_diag = max(float(np.max(np.diagonal(p.voigt, axis1=1, axis2=2))) for p in stored)
    delta = float(data.get("delta", 1e-8 * largest_diag))
    model = MaterialModel(symmetry, Z_I, interpolation, delta, profile, x1, x2, grid, source=data)
    if check:
        report = validate(model)
        if not report.passed:
            first = report.failures[0]
            raise ValidationError(first.kind, first.where, first.message)
    return model


def load_model(path, check=True):
    """Read a JSON model file; see the README for the format."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return model_from_dict(data, check=check)


@dataclass
class KnotCheck:
    where: str
    Z: float
    min_eigenvalue: float
    passed: bool
    kind: str = "convexity"
    message: str = ""


@dataclass
class ValidationReport:
    delta: float
    knots: list
    other: list

    @property
    def failures(self):
        return [k for k in self.knots + self.other if not k.passed]

    @property
    def passed(self):
        return not self.failures

    def lines(self):
        out = [f"delta = {self.delta:.6e}"]
        for k in self.knots:
            out.append(f"{k.where:28s} Z={k.Z:+.6g} min_eig={k.min_eigenvalue:+.6e} "
                       f"{'pass' if k.passed else 'FAIL'}")
        for k in self.other:
            out.append(f"{k.where:28s} {k.kind}: {'pass' if k.passed else 'FAIL'} {k.message}")
        out.append("overall: " + ("pass" if self.passed else "FAIL"))
        return out


def validate(model):
    """Per-knot convexity margins plus symmetry-tag and tail consistency."""
    knots, other = [], []
    for name, prof in model.profiles():
        for n, (Z, v) in enumerate(zip(prof.Z, prof.voigt)):
            where = f"{name} knot {n}"
            margin = float(convexity_margin(v))
            knots.append(KnotCheck(where, float(Z), margin, margin >= model.delta,
                                   message="" if margin >= model.delta else
                                   f"min Mandel eigenvalue {margin:.3e} < delta"))
            defect = symmetry_defect(v, model.symmetry)
            asym = np.abs(v - v.T).max() / max(np.abs(v).max(), 1e-300)
            if defect > 1e-9 or asym > 1e-12:
                other.append(KnotCheck(where, float(Z), margin, False, "symmetry",
                                       f"entries inconsistent with {model.symmetry!r} "
                                       f"(rel. defect {max(defect, asym):.2e})"))
        other.append(KnotCheck(name, prof.Z_I, float("nan"), prof.tail_ok, "tail",
                               "" if prof.tail_ok else "profile is not constant below Z_I"))
    return ValidationReport(model.delta, knots, other)


def layered_isotropic(layers, halfspace, interpolation="step", Z_I=None, rho=1.0):
    """Isotropic model from ``[(thickness, lam, mu), ...]`` over ``(lam, mu)``.

    With step interpolation each layer occupies ``(Z_bottom, Z_top]``.  For a
    homogeneous half-space pass ``layers=[]`` and a ``Z_I``.
    """
    knots = []
    Z = 0.0
    for thickness, lam, mu in layers:
        knots.append({"Z": Z, "rho": rho, "c": {"lambda": lam * rho, "mu": mu * rho}})
        Z -= thickness
    if Z_I is None:
        Z_I = Z if Z < 0 else -1.0
    if Z == 0.0:
        knots.append({"Z": 0.0, "rho": rho, "c": {"lambda": halfspace[0] * rho, "mu": halfspace[1] * rho}})
        Z = Z_I
    knots.append({"Z": Z, "rho": rho, "c": {"lambda": halfspace[0] * rho, "mu": halfspace[1] * rho}})
    if Z > Z_I:
        knots.append({"Z": Z_I, "rho": rho, "c": {"lambda": halfspace[0] * rho, "mu": halfspace[1] * rho}})
    return model_from_dict({"symmetry": "isotropic", "Z_I": Z_I, "interpolation": interpolation,
                            "knots": knots})


def model_from_voigt(Zs, voigts, symmetry="general", interpolation="linear", Z_I=None, delta=None):
    """Laterally homogeneous model straight from density-normalized Voigt matrices."""
    Zs = [float(z) for z in Zs]
    if Z_I is None:
        Z_I = Zs[-1]
    data = {"symmetry": symmetry, "Z_I": Z_I, "interpolation": interpolation,
            "knots": [{"Z": z, "c": np.asarray(v, dtype=float).tolist()} for z, v in zip(Zs, voigts)]}
    if delta is not None:
        data["delta"] = delta
    return model_from_dict(data)
