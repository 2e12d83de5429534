"""Finite-element modal analysis of multi-span continuous beams.

A beam is discretized with 2-node elements carrying a vertical displacement
and a rotation per node (cubic Hermitian interpolation). Each span is split
into equal-length control regions whose elastic modulus is scaled by a
dimensionless stiffness multiplier k_i; k_i = 1 everywhere is the reference
(undamaged) state. All supports are ideal pins: the vertical displacement is
eliminated, rotations stay free.

Shear-deformable (Timoshenko) elements and a lumped (tributary) mass matrix
are available behind flags; the default is a Bernoulli element with a
consistent mass matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from .errors import (
    EigensolverError,
    InvalidModelError,
    LayoutError,
    SingularMassError,
)

# Tolerance for matching sensor/support coordinates to mesh nodes, relative
# to the span length.
_NODE_TOL = 1e-9

# residual postcondition for the generalized eigensolver
_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class BeamModel:
    """Parametric multi-span beam with per-region stiffness multipliers.

    All quantities in SI units (m, m^2, m^4, Pa, kg/m^3).
    """

    n_spans: int
    span_length: float
    area: float
    inertia: float
    elastic_modulus: float
    density: float
    regions_per_span: int = 4
    elements_per_region: int = 8
    shear_deformation: bool = False
    shear_area_factor: float = 5.0 / 6.0
    poisson_ratio: float = 0.2
    lumped_mass: bool = False

    def __post_init__(self):
        for name in ("span_length", "area", "inertia", "elastic_modulus", "density"):
            if not getattr(self, name) > 0.0:
                raise InvalidModelError(f"{name} must be strictly positive")
        if self.n_spans < 1 or self.regions_per_span < 1:
            raise InvalidModelError("n_spans and regions_per_span must be >= 1")
        if self.elements_per_region < 4:
            raise InvalidModelError("elements_per_region must be >= 4")
        if self.shear_deformation and not (0.0 < self.shear_area_factor <= 1.0):
            raise InvalidModelError("shear_area_factor must be in (0, 1]")

    @property
    def n_regions(self) -> int:
        return self.n_spans * self.regions_per_span

    @property
    def region_length(self) -> float:
        return self.span_length / self.regions_per_span

    @property
    def total_length(self) -> float:
        return self.n_spans * self.span_length

    @property
    def support_positions(self) -> np.ndarray:
        return self.span_length * np.arange(self.n_spans + 1, dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BeamModel":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidModelError(f"unknown beam model fields: {sorted(extra)}")
        missing = {"n_spans", "span_length", "area", "inertia", "elastic_modulus", "density"} - set(d)
        if missing:
            raise InvalidModelError(f"missing beam model fields: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "BeamModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SensorLayout:
    """Per-span fractional sensor positions; defaults to l/4, l/2, 3l/4."""

    positions_per_span: tuple = (0.25, 0.5, 0.75)

    def __post_init__(self):
        for p in self.positions_per_span:
            if not 0.0 < p < 1.0:
                raise LayoutError(f"sensor position {p} must lie strictly inside (0, 1)")

    def n_sensors(self, model: BeamModel) -> int:
        return model.n_spans * len(self.positions_per_span)

    def sensor_x(self, model: BeamModel) -> np.ndarray:
        xs = []
        for s in range(model.n_spans):
            for p in self.positions_per_span:
                xs.append((s + p) * model.span_length)
        return np.array(xs)


@dataclass
class BeamMesh:
    """Concrete discretization: sorted node coordinates and per-element modulus."""

    model: BeamModel
    node_x: np.ndarray
    element_modulus: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.node_x) - 1

    @property
    def n_dof(self) -> int:
        return 2 * len(self.node_x)

    def node_at(self, x: float) -> int:
        """Index of the mesh node at coordinate x, or LayoutError."""
        tol = _NODE_TOL * self.model.span_length
        i = int(np.argmin(np.abs(self.node_x - x)))
        if abs(self.node_x[i] - x) > tol:
            raise LayoutError(f"position x={x} does not coincide with a mesh node")
        return i


def base_mesh(model: BeamModel, k=None) -> BeamMesh:
    """Uniform mesh with per-element modulus k_region * E_ref."""
    k = _validate_multipliers(model, k)
    n_el = model.n_regions * model.elements_per_region
    node_x = np.linspace(0.0, model.total_length, n_el + 1)
    mid = 0.5 * (node_x[:-1] + node_x[1:])
    region = np.floor(mid / model.region_length).astype(int)
    region = np.clip(region, 0, model.n_regions - 1)
    E = k[region] * model.elastic_modulus
    return BeamMesh(model=model, node_x=node_x, element_modulus=E)


def _validate_multipliers(model: BeamModel, k) -> np.ndarray:
    if k is None:
        return np.ones(model.n_regions)
    k = np.asarray(k, dtype=float)
    if k.shape != (model.n_regions,):
        raise InvalidModelError(
            f"expected {model.n_regions} stiffness multipliers, got shape {k.shape}"
        )
    if not np.all(k > 0.0):
        raise InvalidModelError("stiffness multipliers must be strictly positive")
    return k


def apply_partial_damage(
    model: BeamModel,
    region: int,
    segment: tuple,
    stiffness_fraction: float,
) -> BeamMesh:
    """Reduce the modulus over a sub-segment of one control region.

    ``segment`` is (x_start, x_len) in meters, with x_start measured from the
    start of the region. The mesh is refined so both segment boundaries fall
    on nodes; elements inside the segment get E * stiffness_fraction.
    """
    if not 0 <= region < model.n_regions:
        raise ValueError(f"region {region} outside [0, {model.n_regions})")
    x_start, x_len = segment
    if x_len <= 0:
        raise ValueError("segment length must be positive")
    if not 0.0 < stiffness_fraction <= 1.0:
        raise ValueError("stiffness_fraction must lie in (0, 1]")
    if x_start < 0 or x_start + x_len > model.region_length + _NODE_TOL * model.span_length:
        raise ValueError("segment must lie inside the control region")

    mesh = base_mesh(model)
    a = region * model.region_length + x_start
    b = a + x_len
    tol = _NODE_TOL * model.span_length
    node_x = mesh.node_x
    for boundary in (a, b):
        if np.min(np.abs(node_x - boundary)) > tol:
            node_x = np.sort(np.append(node_x, boundary))
    mid = 0.5 * (node_x[:-1] + node_x[1:])
    E = np.full(len(node_x) - 1, model.elastic_modulus)
    E[(mid > a) & (mid < b)] *= stiffness_fraction
    return BeamMesh(model=model, node_x=node_x, element_modulus=E)


def element_matrices(E: float, model: BeamModel, length: float):
    """Stiffness and mass matrices of one 2-node element (w, theta per node)."""
    I = model.inertia
    A = model.area
    rho = model.density
    L = length
    EI = E * I
    if model.shear_deformation:
        G = E / (2.0 * (1.0 + model.poisson_ratio))
        phi = 12.0 * EI / (G * model.shear_area_factor * A * L * L)
    else:
        phi = 0.0
    c = EI / (L**3 * (1.0 + phi))
    ke = c * np.array(
        [
            [12.0, 6.0 * L, -12.0, 6.0 * L],
            [6.0 * L, (4.0 + phi) * L * L, -6.0 * L, (2.0 - phi) * L * L],
            [-12.0, -6.0 * L, 12.0, -6.0 * L],
            [6.0 * L, (2.0 - phi) * L * L, -6.0 * L, (4.0 + phi) * L * L],
        ]
    )
    if model.lumped_mass:
        # tributary translational mass; tiny rotational term keeps M positive definite
        mt = rho * A * L / 2.0
        mr = rho * A * L**3 * 1e-9
        me = np.diag([mt, mr, mt, mr])
    else:
        me = (rho * A * L / 420.0) * np.array(
            [
                [156.0, 22.0 * L, 54.0, -13.0 * L],
                [22.0 * L, 4.0 * L * L, 13.0 * L, -3.0 * L * L],
                [54.0, 13.0 * L, 156.0, -22.0 * L],
                [-13.0 * L, -3.0 * L * L, -22.0 * L, 4.0 * L * L],
            ]
        )
    return ke, me


def assemble_mesh(mesh: BeamMesh):
    """Assemble (K, M) and eliminate pinned-support DOFs.

    Returns (K, M, free_dofs) where free_dofs maps rows of K back to the
    full 2*(n_nodes) DOF numbering (w_0, theta_0, w_1, theta_1, ...).
    """
    model = mesh.model
    ndof = mesh.n_dof
    K = np.zeros((ndof, ndof))
    M = np.zeros((ndof, ndof))
    for e in range(mesh.n_elements):
        L = mesh.node_x[e + 1] - mesh.node_x[e]
        ke, me = element_matrices(mesh.element_modulus[e], model, L)
        d = slice(2 * e, 2 * e + 4)
        K[d, d] += ke
        M[d, d] += me
    fixed = [2 * mesh.node_at(x) for x in model.support_positions]
    free = np.setdiff1d(np.arange(ndof), fixed)
    return K[np.ix_(free, free)], M[np.ix_(free, free)], free


def assemble(model: BeamModel, k=None):
    """(K, M) of the uniform mesh with multipliers k, supports applied."""
    K, M, _ = assemble_mesh(base_mesh(model, k))
    return K, M


@dataclass
class RawModes:
    """Eigensolution of K v = lambda M v, smallest n pairs.

    ``vectors`` columns are M-orthonormal and live in the constrained DOF
    numbering given by ``free_dofs``.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    free_dofs: np.ndarray
    residuals: np.ndarray = field(default=None)

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues) / (2.0 * np.pi)


def solve_modes(K: np.ndarray, M: np.ndarray, n: int, free_dofs=None) -> RawModes:
    """Smallest-n eigenpairs of the generalized symmetric problem K v = lambda M v."""
    ndof = K.shape[0]
    if n < 1 or n > ndof:
        raise ValueError(f"requested {n} modes from a {ndof}-DOF system")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMassError("mass matrix is not positive definite") from exc
    try:
        lam, vec = scipy.linalg.eigh(K, M, subset_by_index=[0, n - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigensolverError(f"generalized eigensolver failed: {exc}") from exc
    residuals = np.empty(n)
    for r in range(n):
        kv = K @ vec[:, r]
        residuals[r] = np.linalg.norm(kv - lam[r] * (M @ vec[:, r])) / np.linalg.norm(kv)
    if np.any(residuals > _RESIDUAL_TOL):
        raise EigensolverError(
            f"eigenpair residuals exceed {_RESIDUAL_TOL}: max {residuals.max():.3e}"
        )
    if free_dofs is None:
        free_dofs = np.arange(ndof)
    return RawModes(eigenvalues=lam, vectors=vec, free_dofs=free_dofs, residuals=residuals)


@dataclass
class ModalSignature:
    """n natural frequencies plus n mode shapes sampled at m sensor locations."""

    frequencies: np.ndarray  # (n,), Hz, strictly ascending
    shapes: np.ndarray  # (n, m), unit norm, largest-|component| positive

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def n_points(self) -> int:
        return self.shapes.shape[1]

    def validate(self):
        f = self.frequencies
        if not (np.all(np.isfinite(f)) and np.all(f > 0)):
            raise ValueError("frequencies must be finite and positive")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly ascending")
        norms = np.linalg.norm(self.shapes, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("mode shapes must have unit Euclidean norm")
        for row in self.shapes:
            if row[_sign_anchor(row)] <= 0:
                raise ValueError("largest-|component| entry must be positive")

    def flat(self) -> np.ndarray:
        """[f_1..f_n, phi_1 (m comps), ..., phi_n] of length n*(1+m)."""
        return np.concatenate([self.frequencies, self.shapes.reshape(-1)])

    @classmethod
    def from_flat(cls, y: np.ndarray, n: int, m: int) -> "ModalSignature":
        y = np.asarray(y, dtype=float)
        if y.shape != (n * (1 + m),):
            raise ValueError(f"expected flat length {n * (1 + m)}, got {y.shape}")
        return cls(frequencies=y[:n].copy(), shapes=y[n:].reshape(n, m).copy())


def _sign_anchor(shape: np.ndarray) -> int:
    """Smallest index among components within 1e-9 (rel) of the max magnitude."""
    mags = np.abs(shape)
    cand = np.nonzero(mags >= (1.0 - 1e-9) * mags.max())[0]
    return int(cand[0])


def normalize_shape(shape: np.ndarray) -> np.ndarray:
    """Unit norm with the largest-|component| entry made positive."""
    nrm = np.linalg.norm(shape)
    if nrm == 0.0:
        raise ValueError("cannot normalize a zero mode shape")
    out = shape / nrm
    if out[_sign_anchor(out)] < 0:
        out = -out
    return out


def sample_signature(raw: RawModes, mesh: BeamMesh, layout: SensorLayout, n: int) -> ModalSignature:
    """Restrict mode shapes to vertical DOFs at sensor nodes; normalize and sign-fix."""
    if n > raw.vectors.shape[1]:
        raise ValueError(f"raw result holds {raw.vectors.shape[1]} modes, {n} requested")
    sensor_dofs = [2 * mesh.node_at(x) for x in layout.sensor_x(mesh.model)]
    pos = np.searchsorted(raw.free_dofs, sensor_dofs)
    if np.any(pos >= len(raw.free_dofs)) or np.any(raw.free_dofs[pos] != sensor_dofs):
        raise LayoutError("a sensor sits on a constrained DOF")
    shapes = np.empty((n, len(sensor_dofs)))
    for r in range(n):
        shapes[r] = normalize_shape(raw.vectors[pos, r])
    sig = ModalSignature(frequencies=raw.frequencies[:n].copy(), shapes=shapes)
    sig.validate()
    return sig


def signature_of(model: BeamModel, k=None, layout: SensorLayout = None, n: int = 10,
                 mesh: BeamMesh = None) -> ModalSignature:
    """Full pipeline: assemble, solve, sample. ``mesh`` overrides (model, k)."""
    layout = layout or SensorLayout()
    if mesh is None:
        mesh = base_mesh(model, k)
    K, M, free = assemble_mesh(mesh)
    raw = solve_modes(K, M, n, free_dofs=free)
    return sample_signature(raw, mesh, layout, n)
