import functools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import coo_matrix, csr_matrix, diags
from scipy.sparse.linalg import LinearOperator, gmres, splu
from scipy.special import xlogy

from polymer_subdiffusion.configuration_space import MaxwellianTable, TruncationOps, cutoff
from polymer_subdiffusion.errors import (
    CFLViolation,
    InvalidParameter,
    KernelMismatch,
    ShapeMismatch,
    SolverError,
)
from polymer_subdiffusion.grid import PeriodicGrid, periodic_laplacian
from polymer_subdiffusion.kernel_algebra import (
    HistorySeries,
    KernelWeights,
    convolve,
    history_derivatives,
)
from polymer_subdiffusion.utilities.array import group_by, read_only
from polymer_subdiffusion.utilities.predicates import is_positive

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]
CellSolver = Callable[[FloatArray], FloatArray]

# G(s) = s·ln s + 1/e is the entropy density; G ≥ 0 with G(1/e) = 0.
ENTROPY_OFFSET = math.exp(-1.0)
MAX_PRINCIPLE_TOLERANCE = 1e-8
GMRES_TOLERANCE = 1e-11
GMRES_RESTART = 40
GMRES_MAX_CYCLES = 25
INITIAL_HISTORY_ROWS = 32
# factorizations kept for the most recent (operator set, k0) pairs
SOLVER_CACHE_SIZE = 8


@dataclass(frozen=True)
class FullMode:
    kind = 'full'
    grid: PeriodicGrid


@dataclass(frozen=True)
class HomogeneousMode:
    kind = 'homogeneous'


FieldMode = Union[FullMode, HomogeneousMode]


@dataclass
class _IncrementBuffer:
    rows: FloatArray
    filled: int = 0


# Append-only log of the increments ψ̂_j − ψ̂_{j−1}. Fields produced from one
# another share the buffer; a field that appends to a buffer some other field
# has already extended gets a private copy first, so snapshots never see
# each other's future.
@dataclass(frozen=True, eq=False)
class IncrementLog:
    shape: tuple[int, ...]
    capacity: int
    buffer: _IncrementBuffer
    length: int = 0

    @staticmethod
    def empty(shape: tuple[int, ...], capacity: int) -> 'IncrementLog':
        rows = np.empty((min(capacity, INITIAL_HISTORY_ROWS), *shape))
        return IncrementLog(shape=shape, capacity=capacity, buffer=_IncrementBuffer(rows))

    def append(self, increment: FloatArray) -> 'IncrementLog':
        if self.length >= self.capacity:
            raise KernelMismatch(f'history is full: the kernel covers {self.capacity} steps')

        buffer = self.buffer
        if buffer.filled != self.length or self.length == len(buffer.rows):
            size = min(self.capacity, max(2 * len(buffer.rows), self.length + 1))
            rows = np.empty((size, *self.shape))
            rows[: self.length] = buffer.rows[: self.length]
            buffer = _IncrementBuffer(rows, self.length)

        buffer.rows[self.length] = increment
        buffer.filled = self.length + 1
        return replace(self, buffer=buffer, length=self.length + 1)

    # Σ_{j=1}^{m} k[m+1−j]·Δ_j, the part of D_{m+1} already known before step m+1.
    def memory(self, k_cells: FloatArray) -> FloatArray:
        m = self.length
        if m == 0:
            return np.zeros(self.shape)
        return np.tensordot(k_cells[m:0:-1], self.buffer.rows[:m], axes=1)


@dataclass(frozen=True, eq=False)
class PDFField:
    mode: FieldMode
    values: FloatArray
    initial: FloatArray
    history: IncrementLog
    step: int = 0
    clip_mass: float = 0.0
    root_gradient: float = 0.0
    quiescent: bool = True


# One family of q-faces: each face joins an inner and an outer dof. The drift
# through a face is drift_scale·(normalᵀ·∇u·direction), the normal velocity of
# (∇u)q times M and the face length.
@dataclass(frozen=True, eq=False)
class FaceSet:
    inner: IntArray
    outer: IntArray
    transmissibility: FloatArray
    drift_scale: FloatArray
    normal: FloatArray
    direction: FloatArray

    def drift_flux(self, gradients: FloatArray) -> FloatArray:
        velocity = np.einsum('af,cab,bf->cf', self.normal, gradients, self.direction)
        return self.drift_scale * velocity


@dataclass(frozen=True, eq=False)
class FPOperatorSet:
    table: MaxwellianTable
    grid: Optional[PeriodicGrid]
    radial_faces: FaceSet
    angular_faces: FaceSet
    q_diffusion: csr_matrix
    x_coefficient: float
    q_coefficient: float

    @property
    def faces(self) -> tuple[FaceSet, FaceSet]:
        return (self.radial_faces, self.angular_faces)

    @property
    def n_q(self) -> int:
        return self.table.size

    @property
    def n_cells(self) -> int:
        return 1 if self.grid is None else self.grid.n**2

    @property
    def mass_weights(self) -> FloatArray:
        return self.table.mass_weights.ravel()

    # x-domain measure; homogeneous fields stand for a unit x-volume
    @property
    def domain_area(self) -> float:
        return 1.0 if self.grid is None else self.grid.area


# Transport seen by the Fokker–Planck step: ∇u per x-node ([a, b] = ∂_b u_a)
# and, in full mode, the volumetric x-face fluxes of u through the east and
# north face of every cell.
@dataclass(frozen=True, eq=False)
class TransportData:
    gradient: FloatArray
    east_flux: Optional[FloatArray] = None
    north_flux: Optional[FloatArray] = None


@dataclass(frozen=True, eq=False)
class MaxPrincipleReport:
    rho: FloatArray
    max_rho: FloatArray
    holds: bool


@dataclass(frozen=True, eq=False)
class EntropyDissipationReport:
    residuals: FloatArray
    convolved: FloatArray

    def passed(self, tolerance: float = 1e-10) -> bool:
        return bool(np.all(self.residuals <= tolerance) and np.all(self.convolved <= tolerance))


def constant_transport(gradient: FloatArray) -> TransportData:
    matrix = np.asarray(gradient, dtype=np.float64).reshape(2, 2)
    return TransportData(gradient=read_only(matrix))


def quiescent_transport(mode: FieldMode) -> TransportData:
    if isinstance(mode, HomogeneousMode):
        return constant_transport(np.zeros((2, 2)))
    n = mode.grid.n
    return TransportData(
        gradient=np.zeros((n, n, 2, 2)), east_flux=np.zeros((n, n)), north_flux=np.zeros((n, n))
    )


# L_q = div_q(M∇_q·): each face adds −T on both diagonals and +T off them.
def _face_laplacian(faces: Sequence[FaceSet], size: int) -> csr_matrix:
    rows = np.concatenate([np.concatenate([f.inner, f.outer, f.inner, f.outer]) for f in faces])
    cols = np.concatenate([np.concatenate([f.inner, f.outer, f.outer, f.inner]) for f in faces])
    data = np.concatenate(
        [np.repeat([-1.0, -1.0, 1.0, 1.0], len(f.inner)) * np.tile(f.transmissibility, 4)
         for f in faces]
    )
    return coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()


# Conservative finite volumes on the polar table: cell i spans
# [r_faces[i], r_faces[i+1]] radially and one angular sector. Faces on r = 0
# have zero length and M vanishes on r = √b, so neither carries flux.
def assemble_operators(
    tab: MaxwellianTable,
    grid: Optional[PeriodicGrid] = None,
    x_coefficient: float = 1.0,
    q_coefficient: float = 1.0,
) -> FPOperatorSet:
    if tab.n_r < 2 or tab.n_theta < 3:
        raise InvalidParameter(f'degenerate configuration grid {tab.shape}')
    if not is_positive(x_coefficient) or not is_positive(q_coefficient):
        raise InvalidParameter('diffusion coefficients must be positive')

    n_r, n_theta = tab.shape
    d_theta = tab.d_theta
    index = np.arange(tab.size).reshape(tab.shape)

    r_face = np.repeat(tab.r_faces[1:-1], n_theta)
    m_face = tab.maxwellian_at(r_face)
    gap = np.repeat(np.diff(tab.r), n_theta)
    face_angle = np.tile(tab.theta, n_r - 1)
    radial_unit = np.stack([np.cos(face_angle), np.sin(face_angle)])
    radial = FaceSet(
        inner=index[:-1].ravel(),
        outer=index[1:].ravel(),
        transmissibility=m_face * r_face * d_theta / gap,
        drift_scale=m_face * r_face**2 * d_theta,
        normal=radial_unit,
        direction=radial_unit,
    )

    r_node = np.repeat(tab.r, n_theta)
    m_node = tab.values.ravel()
    width = np.repeat(np.diff(tab.r_faces), n_theta)
    mid_angle = np.tile(tab.theta + 0.5 * d_theta, n_r)
    cos, sin = np.cos(mid_angle), np.sin(mid_angle)
    angular = FaceSet(
        inner=index.ravel(),
        outer=np.roll(index, -1, axis=1).ravel(),
        transmissibility=m_node * width / (r_node * d_theta),
        drift_scale=m_node * width * r_node,
        normal=np.stack([-sin, cos]),
        direction=np.stack([cos, sin]),
    )

    return FPOperatorSet(
        table=tab,
        grid=grid,
        radial_faces=radial,
        angular_faces=angular,
        q_diffusion=_face_laplacian((radial, angular), tab.size),
        x_coefficient=x_coefficient,
        q_coefficient=q_coefficient,
    )


# div_q(M∇_qψ̂) in flux form, per cell row: exactly zero on constants.
def apply_q_diffusion(ops: FPOperatorSet, cells: FloatArray) -> FloatArray:
    result = np.zeros_like(cells)
    for faces in ops.faces:
        flux = faces.transmissibility * (cells[:, faces.outer] - cells[:, faces.inner])
        np.add.at(result, (slice(None), faces.inner), flux)
        np.add.at(result, (slice(None), faces.outer), -flux)
    return result


# Off-diagonals of −div_q(M∇_q·) are ≤ 0, the diagonal is ≥ 0 and columns sum
# to zero against the unit vector.
def is_m_matrix(matrix: csr_matrix, tolerance: float = 1e-12) -> bool:
    entries = matrix.tocoo()
    off_diagonal = entries.data[entries.row != entries.col]
    diagonal = matrix.diagonal()
    column_sums = np.asarray(matrix.sum(axis=0)).ravel()
    scale = max(float(np.max(np.abs(diagonal))), 1.0)
    return bool(
        np.all(off_diagonal <= 0.0)
        and np.all(diagonal >= 0.0)
        and np.max(np.abs(column_sums)) <= tolerance * scale
    )


def _cells(values: FloatArray, ops: FPOperatorSet) -> FloatArray:
    return values.reshape(ops.n_cells, ops.n_q)


def field_shape(mode: FieldMode, tab: MaxwellianTable) -> tuple[int, ...]:
    if isinstance(mode, HomogeneousMode):
        return tab.shape
    return (mode.grid.n, mode.grid.n, *tab.shape)


def initial_field(
    mode: FieldMode, tab: MaxwellianTable, values: FloatArray, steps: int
) -> PDFField:
    expected = field_shape(mode, tab)
    data = np.array(values, dtype=np.float64)
    if data.shape != expected:
        raise ShapeMismatch(f'initial profile has shape {data.shape}, expected {expected}')
    if not np.all(np.isfinite(data)) or np.any(data < 0):
        raise InvalidParameter('initial profile must be finite and nonnegative')

    data = read_only(data)
    return PDFField(
        mode=mode, values=data, initial=data, history=IncrementLog.empty(expected, steps)
    )


def _check_compatible(field: PDFField, ops: FPOperatorSet) -> None:
    grid = field.mode.grid if isinstance(field.mode, FullMode) else None
    if grid != ops.grid:
        raise ShapeMismatch(f'field mode {field.mode} does not match the operator grid {ops.grid}')
    if field.values.shape[-2:] != ops.table.shape:
        raise ShapeMismatch(f'field shape {field.values.shape} does not match the table')


# Implicit upwind drift of M·Γ_ℓ(ψ̂ⁿ⁻¹)·ψ̂ⁿ·(∇u)q, block diagonal over x-cells.
# Rows are net outflow rates; every column sums to zero.
def assemble_drift(
    ops: FPOperatorSet, gradients: FloatArray, upwind_weights: FloatArray
) -> Optional[csr_matrix]:
    if not np.any(gradients):
        return None

    n_cells, n_q = upwind_weights.shape
    offsets = (np.arange(n_cells) * n_q)[:, None]
    rows, cols, data = [], [], []
    for faces in ops.faces:
        flux = faces.drift_flux(gradients)
        forward = np.maximum(flux, 0.0) * upwind_weights[:, faces.inner]
        backward = np.maximum(-flux, 0.0) * upwind_weights[:, faces.outer]
        inner = np.broadcast_to(faces.inner + offsets, flux.shape)
        outer = np.broadcast_to(faces.outer + offsets, flux.shape)
        rows += [inner, outer, outer, inner]
        cols += [inner, inner, outer, outer]
        data += [forward, -forward, backward, -backward]

    size = n_cells * n_q
    return coo_matrix(
        (
            np.concatenate([d.ravel() for d in data]),
            (np.concatenate([r.ravel() for r in rows]), np.concatenate([c.ravel() for c in cols])),
        ),
        shape=(size, size),
    ).tocsr()


def _outflow_rate(transport: TransportData, grid: PeriodicGrid) -> FloatArray:
    east, north = transport.east_flux, transport.north_flux
    assert east is not None and north is not None
    outflow = (
        np.maximum(east, 0.0)
        + np.maximum(-np.roll(east, 1, axis=0), 0.0)
        + np.maximum(north, 0.0)
        + np.maximum(-np.roll(north, 1, axis=1), 0.0)
    )
    return outflow / grid.cell_area


# Explicit upwind div_x(Mψ̂u), integrated against the q-weights, per x-cell.
def x_advection(
    ops: FPOperatorSet, values: FloatArray, transport: TransportData
) -> Optional[FloatArray]:
    grid = ops.grid
    east, north = transport.east_flux, transport.north_flux
    if grid is None or east is None or north is None or not (np.any(east) or np.any(north)):
        return None

    nodes = values.reshape(grid.n, grid.n, ops.n_q)
    east, north = east[..., None], north[..., None]
    east_value = np.where(east > 0, nodes, np.roll(nodes, -1, axis=0)) * east
    north_value = np.where(north > 0, nodes, np.roll(nodes, -1, axis=1)) * north
    divergence = (
        east_value
        - np.roll(east_value, 1, axis=0)
        + north_value
        - np.roll(north_value, 1, axis=1)
    ) / grid.cell_area
    return (divergence * ops.mass_weights).reshape(ops.n_cells, ops.n_q)


def _mode_key(mode: tuple[int, int], n: int) -> tuple[int, int]:
    a, b = (min(k, n - k) for k in mode)
    return (a, b) if a <= b else (b, a)


# Exact inverse of k0·W + ε·W(−Δ_h) + c_q(−L_q): the x-Fourier transform
# diagonalizes Δ_h, and modes sharing an eigenvalue share one sparse LU.
# Operator sets hash by identity, so a run reuses its factorizations.
@functools.lru_cache(maxsize=SOLVER_CACHE_SIZE)
def _diffusion_solver(ops: FPOperatorSet, k0: float) -> CellSolver:
    weights = diags(ops.mass_weights)
    stiffness = -ops.q_coefficient * ops.q_diffusion
    grid = ops.grid

    if grid is None:
        lu = splu((k0 * weights + stiffness).tocsc())

        def solve_homogeneous(rhs: FloatArray) -> FloatArray:
            return lu.solve(rhs.reshape(ops.n_q)).reshape(1, ops.n_q)

        return solve_homogeneous

    n = grid.n
    modes = [(a, b) for a in range(n) for b in range(n)]
    blocks = []
    for (a, b), members in group_by(lambda mode: _mode_key(mode, n))(modes).items():
        shift = k0 + ops.x_coefficient * grid.laplacian_eigenvalue(a, b)
        lu = splu((shift * weights + stiffness).tocsc())
        blocks.append((tuple(np.array(members).T), lu))
    logger.debug('factored %d diffusion blocks for k0=%g', len(blocks), k0)

    def solve_full(rhs: FloatArray) -> FloatArray:
        spectrum = np.fft.fft2(rhs.reshape(n, n, ops.n_q), axes=(0, 1))
        solved = np.empty_like(spectrum)
        for index, block_lu in blocks:
            block = spectrum[index]
            count = block.shape[0]
            stacked = np.concatenate([block.real.T, block.imag.T], axis=1)
            result = block_lu.solve(np.asfortranarray(stacked))
            solved[index] = (result[:, :count] + 1j * result[:, count:]).T
        return np.fft.ifft2(solved, axes=(0, 1)).real.reshape(ops.n_cells, ops.n_q)

    return solve_full


def _apply_diffusion(ops: FPOperatorSet, k0: float, cells: FloatArray) -> FloatArray:
    weights = ops.mass_weights
    result = k0 * weights * cells - ops.q_coefficient * apply_q_diffusion(ops, cells)
    if ops.grid is not None:
        nodes = cells.reshape(ops.grid.n, ops.grid.n, ops.n_q)
        laplacian = periodic_laplacian(nodes, ops.grid).reshape(cells.shape)
        result -= ops.x_coefficient * weights * laplacian
    return result


def _solve_step(
    ops: FPOperatorSet, k0: float, drift: Optional[csr_matrix], rhs: FloatArray
) -> FloatArray:
    solver = _diffusion_solver(ops, k0)
    if drift is None:
        return solver(rhs)

    if ops.grid is None:
        weights = diags(ops.mass_weights)
        system = k0 * weights - ops.q_coefficient * ops.q_diffusion + drift
        return splu(system.tocsc()).solve(rhs.ravel()).reshape(rhs.shape)

    shape = rhs.shape
    size = rhs.size

    def matvec(x: FloatArray) -> FloatArray:
        cells = x.reshape(shape)
        return (_apply_diffusion(ops, k0, cells) + (drift @ x).reshape(shape)).ravel()

    def precondition(x: FloatArray) -> FloatArray:
        return solver(x.reshape(shape)).ravel()

    iterations = [0]

    def count(_: Any) -> None:
        iterations[0] += 1

    system_op = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    preconditioner = LinearOperator((size, size), matvec=precondition, dtype=np.float64)
    b = rhs.ravel()
    solution, info = gmres(
        system_op,
        b,
        x0=precondition(b),
        M=preconditioner,
        rtol=GMRES_TOLERANCE,
        atol=0.0,
        restart=GMRES_RESTART,
        maxiter=GMRES_MAX_CYCLES,
        callback=count,
        callback_type='pr_norm',
    )
    if info != 0:
        raise SolverError(f'GMRES did not converge (info={info}, {iterations[0]} iterations)')
    logger.debug('GMRES converged in %d iterations', iterations[0])
    return solution.reshape(shape)


# One L1 step of
#   W·D_n[ψ̂] + ε·W(−Δ_h)ψ̂ + c_q(−L_q)ψ̂ + Drift(ψ̂) + Adv(ψ̂ⁿ⁻¹) = 0,
# solved for the correction ψ̂ⁿ − ψ̂ⁿ⁻¹ so that equilibrium stays bit-exact.
def fp_step(
    field: PDFField,
    ops: FPOperatorSet,
    kw: KernelWeights,
    transport: TransportData,
    trunc: TruncationOps,
    dt: float,
) -> PDFField:
    _check_compatible(field, ops)
    if not math.isclose(dt, kw.h, rel_tol=1e-12):
        raise KernelMismatch(f'time step {dt} does not match kernel step {kw.h}')
    n = field.step + 1
    if n > kw.steps:
        raise KernelMismatch(f'step {n} lies beyond the kernel horizon of {kw.steps} steps')

    k = kw.k_cells
    k0 = float(k[0])
    weights = ops.mass_weights
    previous = _cells(field.values, ops)

    gradients = np.asarray(transport.gradient).reshape(-1, 2, 2)
    if gradients.shape[0] != ops.n_cells:
        raise ShapeMismatch(
            f'velocity gradient covers {gradients.shape[0]} x-nodes, expected {ops.n_cells}'
        )

    rhs = -weights * _cells(field.history.memory(k), ops) - _apply_diffusion(ops, 0.0, previous)

    advection = x_advection(ops, previous, transport)
    if advection is not None:
        assert ops.grid is not None
        budget = k0 - float(k[1]) if n >= 2 else k0
        ratio = float(np.max(_outflow_rate(transport, ops.grid))) / budget
        if ratio > 1.0:
            raise CFLViolation(f'x-advection CFL ratio {ratio:.3g} exceeds 1', ratio)
        rhs -= advection

    drift = assemble_drift(ops, gradients, cutoff(trunc, previous))
    if drift is not None:
        rhs -= (drift @ previous.ravel()).reshape(previous.shape)

    updated = previous + _solve_step(ops, k0, drift, rhs)
    negative = float(np.sum(np.maximum(-updated, 0.0) * weights)) / ops.n_cells
    if negative > 0.0:
        logger.warning('step %d: clipped %.3e of negative mass', n, negative)
        updated = np.maximum(updated, 0.0)

    values = read_only(updated.reshape(field.values.shape))
    return replace(
        field,
        values=values,
        history=field.history.append(values - field.values),
        step=n,
        clip_mass=field.clip_mass + negative,
        root_gradient=_root_gradient(values, ops),
        quiescent=field.quiescent and drift is None and advection is None,
    )


def _face_sum(
    values: FloatArray, ops: FPOperatorSet, pair: Callable[[FloatArray, FloatArray], FloatArray]
) -> float:
    cells = _cells(values, ops)
    total = 0.0
    for faces in ops.faces:
        terms = pair(cells[:, faces.inner], cells[:, faces.outer])
        total += ops.q_coefficient * float(np.sum(faces.transmissibility * terms)) / ops.n_cells

    grid = ops.grid
    if grid is not None:
        nodes = cells.reshape(grid.n, grid.n, ops.n_q)
        for axis in (0, 1):
            terms = pair(nodes, np.roll(nodes, -1, axis=axis))
            total += (
                ops.x_coefficient
                * float(np.sum(ops.mass_weights * terms))
                / (ops.n_cells * grid.cell_area)
            )
    return total


def _root_gradient(values: FloatArray, ops: FPOperatorSet) -> float:
    def pair(a: FloatArray, b: FloatArray) -> FloatArray:
        return 4.0 * (np.sqrt(a) - np.sqrt(b)) ** 2

    return ops.domain_area * _face_sum(values, ops, pair)


# 4‖∇√ψ̂‖²_{L²_M} over the whole domain, with the diffusion coefficients folded in.
def root_gradient(field: PDFField, ops: FPOperatorSet) -> float:
    return _root_gradient(field.values, ops)


def _log_pair(a: FloatArray, b: FloatArray) -> FloatArray:
    with np.errstate(divide='ignore', invalid='ignore'):
        product = (a - b) * (np.log(a) - np.log(b))
    return np.where(a == b, 0.0, np.where((a > 0) & (b > 0), product, np.inf))


# Σ_faces T·(a − b)(ln a − ln b), x-averaged: the entropy production of the
# diffusion part of the discrete operator.
def dissipation(field: PDFField, ops: FPOperatorSet) -> float:
    return _face_sum(field.values, ops, _log_pair)


def _cell_sums(values: FloatArray, tab: MaxwellianTable) -> FloatArray:
    return np.sum(values * tab.mass_weights, axis=(-2, -1))


def entropy(field: PDFField, tab: MaxwellianTable) -> float:
    density = xlogy(field.values, field.values) + ENTROPY_OFFSET
    return float(np.mean(_cell_sums(density, tab)))


def relative_entropy(field: PDFField, tab: MaxwellianTable) -> float:
    return entropy(field, tab) - ENTROPY_OFFSET * float(np.sum(tab.mass_weights))


def mass(field: PDFField, tab: MaxwellianTable) -> float:
    return float(np.mean(_cell_sums(field.values, tab)))


def min_value(field: PDFField) -> float:
    return float(np.min(field.values))


def rho(field: PDFField, tab: MaxwellianTable) -> FloatArray:
    if not isinstance(field.mode, FullMode):
        raise InvalidParameter('ρ is defined over x and needs a full-mode field')
    return _cell_sums(field.values, tab)


def rho_and_max_principle(
    fields: Union[PDFField, Sequence[PDFField]], tab: MaxwellianTable
) -> MaxPrincipleReport:
    trajectory = [fields] if isinstance(fields, PDFField) else list(fields)
    if not trajectory:
        raise InvalidParameter('maximum principle check needs at least one field')

    initial = float(np.max(_cell_sums(trajectory[0].initial, tab)))
    maxima = np.array([float(np.max(rho(f, tab))) for f in trajectory])
    return MaxPrincipleReport(
        rho=rho(trajectory[-1], tab),
        max_rho=maxima,
        holds=bool(np.all(maxima <= initial + MAX_PRINCIPLE_TOLERANCE)),
    )


# Residuals D_n[E] + dissipation_n (≤ 0 by convexity of G) and the convolved
# trace (k∗[E − E₀])_n (≤ 0) along a transport-free trajectory ψ̂₀, ψ̂₁, …
def entropy_dissipation_check(
    trajectory: Sequence[PDFField], kw: KernelWeights, tab: MaxwellianTable, ops: FPOperatorSet
) -> EntropyDissipationReport:
    if len(trajectory) < 2:
        raise KernelMismatch('entropy check needs the initial state and at least one step')
    if any(not f.quiescent for f in trajectory):
        raise InvalidParameter('entropy dissipation check applies to runs without velocity only')
    if [f.step for f in trajectory] != list(range(len(trajectory))):
        raise KernelMismatch('trajectory must hold consecutive steps starting at 0')

    energies = np.array([entropy(f, tab) for f in trajectory])
    derivatives = history_derivatives(kw, HistorySeries(h=kw.h, samples=energies))
    produced = np.array([dissipation(f, ops) for f in trajectory[1:]])
    return EntropyDissipationReport(
        residuals=derivatives + produced,
        convolved=convolve(kw, energies[1:] - energies[0]),
    )
