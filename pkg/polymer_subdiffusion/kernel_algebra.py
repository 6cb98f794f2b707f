import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular, toeplitz
from scipy.special import gamma

from polymer_subdiffusion.errors import InvalidParameter, KernelMismatch, SingularSystem
from polymer_subdiffusion.utilities.array import read_only
from polymer_subdiffusion.utilities.predicates import is_open_unit, is_positive, is_positive_integer

FloatArray = NDArray[np.float64]

SONINE_TOLERANCE = 1e-12


# (k, k̃) = (g_{1−α}, g_α): the Caputo pair of order α.
@dataclass(frozen=True)
class AbelKernel:
    kind = 'abel'
    alpha: float


# k̃ ≡ 1, k the identity of convolution: the local time derivative.
@dataclass(frozen=True)
class ClassicalKernel:
    kind = 'classical_limit'


# Cell averages supplied directly, one per time cell.
@dataclass(frozen=True)
class TabulatedKernel:
    kind = 'tabulated'
    values: tuple[float, ...]


KernelKind = Union[AbelKernel, ClassicalKernel, TabulatedKernel]


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    horizon: float
    steps: int

    @property
    def h(self) -> float:
        return self.horizon / self.steps


@dataclass(frozen=True, eq=False)
class KernelWeights:
    kind: KernelKind
    h: float
    k_cells: FloatArray
    kt_cells: Optional[FloatArray] = None

    @property
    def steps(self) -> int:
        return len(self.k_cells)

    def resolvent(self) -> FloatArray:
        if self.kt_cells is None:
            raise KernelMismatch('kernel weights carry no resolvent; call discrete_resolvent first')
        return self.kt_cells


@dataclass(frozen=True, eq=False)
class HistorySeries:
    h: float
    samples: FloatArray
    y0: float = field(default=math.nan)

    def __post_init__(self) -> None:
        if math.isnan(self.y0) and len(self.samples) > 0:
            object.__setattr__(self, 'y0', float(self.samples[0]))
        if len(self.samples) > 0 and self.samples[0] != self.y0:
            raise InvalidParameter('history must start with its initial value')

    @property
    def n(self) -> int:
        return len(self.samples) - 1


def validate_kernel_spec(spec: KernelSpec) -> None:
    if not is_positive_integer(spec.steps):
        raise InvalidParameter(f'kernel needs at least one step, got N={spec.steps}')
    if not is_positive(spec.horizon):
        raise InvalidParameter(f'horizon must be positive, got T={spec.horizon}')

    kind = spec.kind
    if isinstance(kind, AbelKernel):
        if not is_open_unit(kind.alpha):
            raise InvalidParameter(f'alpha out of (0,1): {kind.alpha}')
    elif isinstance(kind, TabulatedKernel):
        values = np.asarray(kind.values, dtype=np.float64)
        if len(values) < spec.steps:
            raise InvalidParameter(
                f'tabulated kernel has {len(values)} cells but {spec.steps} steps are required'
            )
        if np.any(values < 0) or np.any(np.diff(values[: spec.steps]) > 0):
            raise InvalidParameter('tabulated kernel must be nonnegative and nonincreasing')


# Pointwise k(t) for t > 0; the classical kernel is a Dirac mass at 0.
def kernel_value(spec: KernelSpec, t: float) -> float:
    if t <= 0:
        raise InvalidParameter(f'kernel is evaluated for t > 0 only, got {t}')

    kind = spec.kind
    if isinstance(kind, AbelKernel):
        return float(t ** (-kind.alpha) / gamma(1.0 - kind.alpha))
    if isinstance(kind, ClassicalKernel):
        return 0.0

    cell = min(int(t / spec.h), len(kind.values) - 1)
    return float(kind.values[cell])


# Cell averages (1/h)∫ k over [jh, (j+1)h). For the Abel kernel the power-law
# antiderivative t^{1−α}/Γ(2−α) gives them in closed form, which sidesteps the
# singularity at t = 0.
def tabulate_kernel(spec: KernelSpec) -> KernelWeights:
    validate_kernel_spec(spec)
    h = spec.h
    kind = spec.kind

    if isinstance(kind, AbelKernel):
        alpha = kind.alpha
        nodes = np.arange(spec.steps + 1, dtype=np.float64) ** (1.0 - alpha)
        k_cells = np.diff(nodes) * h ** (-alpha) / gamma(2.0 - alpha)
    elif isinstance(kind, ClassicalKernel):
        k_cells = np.zeros(spec.steps)
        k_cells[0] = 1.0 / h
    else:
        k_cells = np.array(kind.values[: spec.steps], dtype=np.float64)

    return KernelWeights(kind=kind, h=h, k_cells=read_only(k_cells))


# Solves h·Σ_{j≤n} k[n−j]·k̃[j] = 1 for every n, a lower-triangular Toeplitz system.
def discrete_resolvent(kw: KernelWeights) -> KernelWeights:
    if kw.k_cells[0] <= 0:
        raise SingularSystem('discrete Sonine system is singular: k_cells[0] = 0')

    n = kw.steps
    system = toeplitz(kw.k_cells, np.zeros(n)) * kw.h
    kt_cells = solve_triangular(system, np.ones(n), lower=True, check_finite=False)

    return replace(kw, kt_cells=read_only(np.asarray(kt_cells, dtype=np.float64)))


def make_pair(spec: KernelSpec) -> KernelWeights:
    return discrete_resolvent(tabulate_kernel(spec))


def sonine_residuals(kw: KernelWeights) -> FloatArray:
    n = kw.steps
    return kw.h * np.convolve(kw.k_cells, kw.resolvent())[:n] - 1.0


def sonine_residual(kw: KernelWeights) -> float:
    return float(np.max(np.abs(sonine_residuals(kw))))


def _check_history(kw: KernelWeights, hist: HistorySeries) -> None:
    if hist.n < 1:
        raise KernelMismatch('history holds no samples beyond the initial value')
    if not math.isclose(kw.h, hist.h, rel_tol=1e-12):
        raise KernelMismatch(f'history step {hist.h} does not match kernel step {kw.h}')
    if hist.n > kw.steps:
        raise KernelMismatch(f'history of {hist.n} steps exceeds the kernel horizon {kw.steps}')


# D_m for m = 1..n: the L1 scheme Σ_j k[m−j]·(y_j − y_{j−1}).
def history_derivatives(kw: KernelWeights, hist: HistorySeries) -> FloatArray:
    _check_history(kw, hist)
    increments = np.diff(hist.samples)
    return np.convolve(kw.k_cells[: hist.n], increments)[: hist.n]


def nonlocal_derivative(kw: KernelWeights, hist: HistorySeries) -> float:
    _check_history(kw, hist)
    n = hist.n
    increments = np.diff(hist.samples)
    return float(np.dot(kw.k_cells[n - 1 :: -1], increments))


# (k∗v)_n = h·Σ_{j=1}^{n} k[n−j]·v_j for a series v_1..v_n.
def convolve(kw: KernelWeights, values: FloatArray) -> FloatArray:
    n = len(values)
    return kw.h * np.convolve(kw.k_cells[:n], values)[:n]


def resolvent_convolve(kw: KernelWeights, values: FloatArray) -> FloatArray:
    n = len(values)
    return kw.h * np.convolve(kw.resolvent()[:n], values)[:n]


# (k∗1)(t_n); with the default n = N this is ‖k‖_{L¹(0,T)}.
def kernel_l1_norm(kw: KernelWeights, n: Optional[int] = None) -> float:
    count = kw.steps if n is None else n
    return float(kw.h * np.sum(kw.k_cells[:count]))


def solve_fractional_relaxation(spec: KernelSpec, rate: float, y0: float) -> HistorySeries:
    if not rate >= 0:
        raise InvalidParameter(f'relaxation rate must be nonnegative, got {rate}')

    kw = tabulate_kernel(spec)
    k = kw.k_cells
    samples = np.empty(spec.steps + 1)
    samples[0] = y0
    increments = np.zeros(spec.steps + 1)

    # k0·(y_n − y_{n−1}) + Σ_{j<n} k[n−j]·Δy_j = −λ·y_n, solved for y_n
    for n in range(1, spec.steps + 1):
        memory = np.dot(k[n - 1 : 0 : -1], increments[1:n])
        samples[n] = (k[0] * samples[n - 1] - memory) / (k[0] + rate)
        increments[n] = samples[n] - samples[n - 1]

    return HistorySeries(h=kw.h, samples=samples, y0=y0)


# y_n·D_n[y] − ½·D_n[y²]; nonnegative for any nonincreasing nonnegative kernel.
def check_alikhanov(kw: KernelWeights, hist: HistorySeries) -> float:
    squares = HistorySeries(h=hist.h, samples=hist.samples**2)
    return float(
        hist.samples[-1] * nonlocal_derivative(kw, hist) - 0.5 * nonlocal_derivative(kw, squares)
    )


def check_inverse_convolution(kw: KernelWeights, hist: HistorySeries) -> float:
    recovered = resolvent_convolve(kw, history_derivatives(kw, hist))
    return float(np.max(np.abs(recovered - (hist.samples[1:] - hist.y0))))


# Slack (1/k(T))·(k∗u^p)_n − h·Σ_{j≤n} u_j^p over a nonnegative series u_1..u_n.
def check_kernel_norm_bound(
    kw: KernelWeights, spec: KernelSpec, values: FloatArray, p: float = 1.0
) -> FloatArray:
    if not isinstance(spec.kind, AbelKernel):
        raise InvalidParameter('the kernel-norm bound needs a kernel with k(T) > 0')
    if np.any(values < 0):
        raise InvalidParameter('the kernel-norm bound is stated for nonnegative series')

    powered = values**p
    return convolve(kw, powered) / kernel_value(spec, spec.horizon) - kw.h * np.cumsum(powered)
