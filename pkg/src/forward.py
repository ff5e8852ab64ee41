"""
Forward solver: rigid rough surface, truncated and tapered, combined-layer Nystrom method

The surface is truncated to |t| <= L_b, the parameter interval is mapped onto
[0, 2 pi) and the kernel of (I + D - i eta S) is split as

    K(t, tau) = K1(t, tau) ln(4 sin^2((s - sigma)/2)) + K2(t, tau)

with the logarithmic part windowed by a smooth cutoff in |t - tau|. The
log-weighted integral uses the trigonometric-interpolation weights R_j, the
remainder the trapezoid rule.
"""

import hashlib
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve
from tqdm import tqdm

from config.config import Config
from src.errors import DomainError, GeometryError, ResolutionError, ShapeMismatchError, SingularSystemError
from src.greens import (
    SCALE_GREEN, SCALE_LOG, CurvePoint, green_regular_limit, green_tensor,
    im_green_at_coincidence, kelvin_double_layer_limit, stress_kernel,
)
from src.medium_geom import (
    DirectionGrid, ElasticMedium, MeasurementLine, StressParams, SurfaceProfile, flat_surface, perp,
)

MIN_NODES_PER_WAVELENGTH = 10.0
ROW_CHUNK = 48


@dataclass
class SolverParams:
    """Truncation, taper and discretisation settings; None means the default derived from the geometry"""
    nodes_per_wavelength: float = 10.0
    half_width: Optional[float] = None      # L_b, default t0 + 1.75 w_t
    taper_start: Optional[float] = None     # t0, default A + 6 shear wavelengths
    taper_width: Optional[float] = None     # w_t, default 8 shear wavelengths
    eta: Optional[complex] = None           # default ks
    node_count: Optional[int] = None        # Q, default from nodes_per_wavelength
    threads: int = 0

    def coupling(self, medium: ElasticMedium) -> complex:
        eta = complex(medium.ks if self.eta is None else self.eta)
        if eta.real <= 0:
            raise ValueError(f"coupling parameter needs Re(eta) > 0, got {eta}")
        return eta


def taper(t, start: float, width: float) -> np.ndarray:
    """exp(-((|t| - t0)_+ / w_t)^2)"""
    excess = np.maximum(np.abs(np.asarray(t, dtype=float)) - start, 0.0)
    return np.exp(-(excess / width) ** 2)


def _smooth_cutoff(u: np.ndarray, half_width: float) -> np.ndarray:
    """C-infinity window: 1 for |u| <= L/2, 0 for |u| >= L"""
    x = np.clip((np.abs(u) - 0.5 * half_width) / (0.5 * half_width), 0.0, 1.0)
    with np.errstate(divide='ignore', over='ignore'):
        g_in = np.where(x < 1.0, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
        g_out = np.where(x > 0.0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return g_in / (g_in + g_out)


def kress_weights(n: int) -> np.ndarray:
    """R(d) for d = 0..2n-1: weights of int_0^{2pi} ln(4 sin^2((s - sigma)/2)) g(sigma) d sigma"""
    d = np.arange(2 * n)
    m = np.arange(1, n)
    series = np.cos(np.outer(d, m) * math.pi / n) @ (1.0 / m) if n > 1 else np.zeros(2 * n)
    return -(2.0 * math.pi / n) * series - (math.pi / n ** 2) * (-1.0) ** d


def _kress_weights_at(s: np.ndarray, sigma: np.ndarray, n: int) -> np.ndarray:
    """R_j(s) for arbitrary s, shape (len(s), len(sigma))"""
    diff = s[:, None] - sigma[None, :]
    m = np.arange(1, n)
    series = np.cos(diff[..., None] * m) @ (1.0 / m)
    return -(2.0 * math.pi / n) * series - (math.pi / n ** 2) * np.cos(n * diff)


@dataclass
class TruncatedBoundary:
    """Uniform-in-t nodes on the graph over [-L_b, L_b) with the taper of the illumination"""
    surface: SurfaceProfile
    half_width: float
    Q: int
    taper_start: float
    taper_width: float
    t: np.ndarray = field(init=False, repr=False)
    points: np.ndarray = field(init=False, repr=False)
    fp: np.ndarray = field(init=False, repr=False)
    curvature: np.ndarray = field(init=False, repr=False)
    jac: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.Q < 4 or self.Q % 2:
            raise ResolutionError(f"node count Q must be even and >= 4, got {self.Q}")
        if self.half_width <= 0 or self.taper_width <= 0:
            raise GeometryError("truncation half-width and taper width must be positive")
        if self.taper_start >= self.half_width:
            raise GeometryError(
                f"taper start {self.taper_start} must lie inside the truncation half-width {self.half_width}"
            )
        self.t = -self.half_width + self.dt * np.arange(self.Q)
        f = np.asarray(self.surface.eval(self.t), dtype=float)
        self.points = np.stack([self.t, f], axis=-1)
        self.fp = np.asarray(self.surface.deriv(self.t), dtype=float)
        self.curvature = np.asarray(self.surface.curvature(self.t), dtype=float)
        self.jac = np.sqrt(1.0 + self.fp ** 2)
        self.normals = np.stack([-self.fp, np.ones_like(self.fp)], axis=-1) / self.jac[:, None]
        self.tangents = np.stack([np.ones_like(self.fp), self.fp], axis=-1) / self.jac[:, None]
        self.weights = self.dt * self.jac

    @property
    def dt(self) -> float:
        return 2.0 * self.half_width / self.Q

    @property
    def n(self) -> int:
        return self.Q // 2

    @property
    def s(self) -> np.ndarray:
        """Periodised parameter pi (t + L_b) / L_b of the nodes"""
        return math.pi * np.arange(self.Q) / self.n

    def to_s(self, t) -> np.ndarray:
        return math.pi * (np.asarray(t, dtype=float) + self.half_width) / self.half_width

    def taper_at(self, t) -> np.ndarray:
        return taper(t, self.taper_start, self.taper_width)

    def nodes_per_wavelength(self, medium: ElasticMedium) -> float:
        return medium.wavelength_s / float(np.max(self.weights))

    def check_resolution(self, medium: ElasticMedium, minimum: float = MIN_NODES_PER_WAVELENGTH):
        density = self.nodes_per_wavelength(medium)
        if density < minimum:
            raise ResolutionError(
                f"{density:.2f} nodes per shear wavelength along the arc, need at least {minimum:g} "
                f"(Q={self.Q}, L_b={self.half_width:.4g})"
            )

    def to_dict(self) -> Dict[str, float]:
        return {
            'half_width': self.half_width, 'Q': self.Q,
            'taper_start': self.taper_start, 'taper_width': self.taper_width,
        }


def default_boundary(surface: SurfaceProfile, medium: ElasticMedium, A: float,
                     params: Optional[SolverParams] = None) -> TruncatedBoundary:
    """Boundary with L_b, t0, w_t and Q taken from params or from the shear wavelength"""
    params = params or SolverParams()
    wl = medium.wavelength_s
    if params.nodes_per_wavelength < MIN_NODES_PER_WAVELENGTH:
        raise ResolutionError(
            f"nodes_per_wavelength={params.nodes_per_wavelength} is below {MIN_NODES_PER_WAVELENGTH:g}"
        )
    start = params.taper_start if params.taper_start is not None else A + 6.0 * wl
    width = params.taper_width if params.taper_width is not None else 8.0 * wl
    # the taper has fallen below 5% at the truncation edge
    half_width = params.half_width if params.half_width is not None else start + 1.75 * width

    if params.node_count is not None:
        return TruncatedBoundary(surface, half_width, int(params.node_count), start, width)

    # raise Q until the longest arc element meets the requested density
    q = 2 * math.ceil(half_width * params.nodes_per_wavelength / wl)
    for _ in range(8):
        boundary = TruncatedBoundary(surface, half_width, q, start, width)
        if boundary.nodes_per_wavelength(medium) >= params.nodes_per_wavelength:
            return boundary
        q = 2 * math.ceil(0.5 * q * params.nodes_per_wavelength / boundary.nodes_per_wavelength(medium))
    return boundary


@dataclass(frozen=True)
class IncidentWave:
    """Unit-amplitude plane wave: d e^{i kp d.x} (P) or d^perp e^{i ks d.x} (S)"""
    kind: str
    direction: np.ndarray
    wavenumber: float

    @classmethod
    def of(cls, kind: str, d, medium: ElasticMedium) -> 'IncidentWave':
        kind = kind.upper()
        if kind not in ('P', 'S'):
            raise ValueError(f"wave kind must be 'P' or 'S', got {kind}")
        d = np.asarray(d, dtype=float)
        d = d / np.linalg.norm(d)
        return cls(kind, d, medium.kp if kind == 'P' else medium.ks)

    @property
    def polarization(self) -> np.ndarray:
        return self.direction if self.kind == 'P' else perp(self.direction)

    def trace(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * self.wavenumber * (x @ self.direction))
        return phase[..., None] * self.polarization


@dataclass
class BIESystem:
    """Factorized Nystrom matrix of (I + D - i eta S); independent of the incident wave"""
    medium: ElasticMedium
    boundary: TruncatedBoundary
    eta: complex
    stress: StressParams
    matrix: np.ndarray = field(repr=False)
    lu: Tuple[np.ndarray, np.ndarray] = field(repr=False)
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def assembly_hash(self) -> str:
        return str(self.metadata.get('assembly_hash', ''))


def _combined_kernel(x, y, normal, medium, sp, eta, kind, scale) -> np.ndarray:
    """2 (P_y[K]^T - i eta K) for the (kind, scale) variant of the Green's tensor"""
    single = green_tensor(x, y, medium, kind, scale)
    # columns of P_y[Pi] are tractions of the columns of Pi; the double layer acts with the transpose
    double = np.swapaxes(stress_kernel(x, CurvePoint(y, normal), medium, sp, kind, scale), -1, -2)
    return 2.0 * (double - 1j * eta * single)


def _split_kernels(boundary: TruncatedBoundary, medium: ElasticMedium, sp: StressParams, eta: complex,
                   t_rows: np.ndarray, x_rows: np.ndarray, coincident: Optional[np.ndarray] = None):
    """
    K1 and K2 for collocation parameters t_rows (points x_rows) against all nodes

    Entries flagged in `coincident` get a meaningless K2 that the caller replaces.
    """
    L = boundary.half_width
    stretch = boundary.jac * L / math.pi
    y = boundary.points[None, :, :]
    normals = boundary.normals[None, :, :]
    x = x_rows[:, None, :]

    log_coeff = _combined_kernel(x, y, normals, medium, sp, eta, 'j', SCALE_LOG)
    window = _smooth_cutoff(t_rows[:, None] - boundary.t[None, :], L)
    k1 = 0.5 * log_coeff * (stretch[None, :] * window)[..., None, None]

    if coincident is not None and np.any(coincident):
        # move coincident sources off the collocation point; those entries are overwritten
        y = np.where(coincident[..., None], y + np.array([L, 0.0]), y)
    full = _combined_kernel(x, y, normals, medium, sp, eta, 'h', SCALE_GREEN)

    diff = boundary.to_s(t_rows)[:, None] - boundary.s[None, :]
    with np.errstate(divide='ignore'):
        log_sin = np.log(4.0 * np.sin(0.5 * diff) ** 2)
    if coincident is not None:
        log_sin = np.where(coincident, 0.0, log_sin)
    k2 = full * stretch[None, :, None, None] - k1 * log_sin[..., None, None]
    return k1, k2


def _diagonal_k2(boundary: TruncatedBoundary, medium: ElasticMedium, sp: StressParams, eta: complex) -> np.ndarray:
    """K2(t_q, t_q) from the small-separation expansions, shape (Q, 2, 2)"""
    scale = boundary.jac * boundary.half_width / math.pi
    tt = boundary.tangents[:, :, None] * boundary.tangents[:, None, :]
    a_reg, b0 = green_regular_limit(medium)
    regular = a_reg * np.eye(2) + b0 * tt
    log_part = (4.0 / math.pi) * im_green_at_coincidence(medium) * np.log(scale)[:, None, None]
    double = kelvin_double_layer_limit(medium, boundary.curvature, boundary.tangents, sp)
    return scale[:, None, None] * (double - 1j * eta * (2.0 * regular - log_part))


def _assemble_rows(boundary, medium, sp, eta, weights_r, diag_k2, rows: np.ndarray) -> np.ndarray:
    cols = np.arange(boundary.Q)
    coincident = rows[:, None] == cols[None, :]
    k1, k2 = _split_kernels(boundary, medium, sp, eta, boundary.t[rows], boundary.points[rows], coincident)
    k2[coincident] = diag_k2[rows]
    offsets = (rows[:, None] - cols[None, :]) % boundary.Q
    block = weights_r[offsets][..., None, None] * k1 + (math.pi / boundary.n) * k2
    block[coincident] += np.eye(2)
    return block


def assemble(surface: SurfaceProfile, medium: ElasticMedium, eta: Optional[complex] = None,
             boundary: Optional[TruncatedBoundary] = None, params: Optional[SolverParams] = None) -> BIESystem:
    """
    Assemble and factorize the Nystrom matrix of (I + D - i eta S)

    Args:
        surface: rough-surface profile
        medium: elastic medium
        eta: coupling parameter (Re(eta) > 0), defaults to ks
        boundary: truncated boundary; default_boundary(surface, medium, 0) when omitted
        params: solver settings (threads, defaults)

    Returns:
        BIESystem holding the matrix and its LU factors
    """
    params = params or SolverParams()
    if eta is None:
        eta = params.coupling(medium)
    eta = complex(eta)
    if eta.real <= 0:
        raise ValueError(f"coupling parameter needs Re(eta) > 0, got {eta}")
    boundary = boundary or default_boundary(surface, medium, 0.0, params)
    boundary.check_resolution(medium)

    sp = medium.stress_params()
    Q = boundary.Q
    weights_r = kress_weights(boundary.n)
    diag_k2 = _diagonal_k2(boundary, medium, sp, eta)

    started = time.perf_counter()
    chunks = [np.arange(i, min(i + ROW_CHUNK, Q)) for i in range(0, Q, ROW_CHUNK)]
    workers = params.threads or Config.worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        blocks = list(pool.map(
            lambda rows: _assemble_rows(boundary, medium, sp, eta, weights_r, diag_k2, rows), chunks
        ))
    matrix = np.concatenate(blocks, axis=0).transpose(0, 2, 1, 3).reshape(2 * Q, 2 * Q)
    assembly_seconds = time.perf_counter() - started

    if not np.all(np.isfinite(matrix)):
        raise SingularSystemError("Nystrom matrix contains non-finite entries")

    started = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('error', LinAlgWarning)
            lu = lu_factor(matrix)
    except (LinAlgError, LinAlgWarning, ValueError) as e:
        raise SingularSystemError(f"factorization failed: {e}") from e
    factor_seconds = time.perf_counter() - started

    metadata = {
        'assembly_hash': hashlib.sha256(matrix.tobytes()).hexdigest(),
        'assembly_seconds': assembly_seconds,
        'factor_seconds': factor_seconds,
        'Q': Q,
        'surface': surface.id,
    }
    logger.info(
        f"Assembled {2 * Q}x{2 * Q} system for '{surface.id}' in {assembly_seconds:.2f}s, "
        f"factorized in {factor_seconds:.2f}s"
    )
    return BIESystem(medium, boundary, eta, sp, matrix, lu, metadata)


def _right_hand_side(system: BIESystem, inc: IncidentWave, use_taper: bool) -> np.ndarray:
    boundary = system.boundary
    trace = inc.trace(boundary.points)
    if use_taper:
        trace = trace * boundary.taper_at(boundary.t)[:, None]
    return (2.0 * trace).reshape(-1)


def solve_density(system: BIESystem, inc: IncidentWave, use_taper: bool = True) -> np.ndarray:
    """Density phi_q, shape (Q, 2), for right-hand side 2 taper(t_q) u^in(y_q)"""
    started = time.perf_counter()
    phi = lu_solve(system.lu, _right_hand_side(system, inc, use_taper))
    logger.debug(f"Solved {inc.kind} incidence d={inc.direction} in {time.perf_counter() - started:.3f}s")
    return phi.reshape(system.boundary.Q, 2)


def solve_many(system: BIESystem, incidents: Sequence[IncidentWave], use_taper: bool = True,
               threads: int = 0, chunk: int = 32, progress: bool = False) -> np.ndarray:
    """Densities for several incident waves with one factorization, shape (Q, 2, R)"""
    Q = system.boundary.Q
    rhs = np.stack([_right_hand_side(system, inc, use_taper) for inc in incidents], axis=-1)
    groups = [slice(i, min(i + chunk, rhs.shape[1])) for i in range(0, rhs.shape[1], chunk)]

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads or Config.worker_count()) as pool:
        parts = pool.map(lambda sl: lu_solve(system.lu, rhs[:, sl]), groups)
        solved = list(tqdm(parts, total=len(groups), desc='solve', unit='chunk', disable=not progress))
    elapsed = time.perf_counter() - started
    logger.info(f"Solved {rhs.shape[1]} right-hand sides in {elapsed:.2f}s "
                f"({elapsed / max(rhs.shape[1], 1) * 1e3:.2f} ms each)")
    return np.concatenate(solved, axis=1).reshape(Q, 2, -1)


def _check_above(system: BIESystem, x: np.ndarray):
    boundary = system.boundary
    heights = np.asarray(boundary.surface.eval(x[..., 0]), dtype=float)
    if np.any(x[..., 1] <= heights):
        raise DomainError("field requested on or below the surface")
    gap = np.min(np.linalg.norm(x.reshape(-1, 1, 2) - boundary.points[None], axis=-1))
    if gap < 0.5 * boundary.dt:
        raise DomainError(f"evaluation point within {gap:.3g} of a boundary node (need >= {0.5 * boundary.dt:.3g})")


def scattered_field(system: BIESystem, density: np.ndarray, x, chunk: int = 64) -> np.ndarray:
    """
    u^sc(x) = -sum_q [P_y Pi^T - i eta Pi](x, y_q) phi_q w_q

    Args:
        density: (Q, 2) or (Q, 2, R) for R densities at once
        x: points (..., 2) strictly above the surface

    Returns:
        (..., 2) or (..., 2, R) complex field
    """
    x = np.asarray(x, dtype=float)
    _check_above(system, x)
    boundary = system.boundary
    density = np.asarray(density)
    single = density.ndim == 2
    phi = density[..., None] if single else density
    weighted = phi * boundary.weights[:, None, None]

    flat = x.reshape(-1, 2)
    out = np.empty((flat.shape[0], 2, phi.shape[-1]), dtype=complex)
    y = boundary.points[None]
    normals = boundary.normals[None]
    for i in range(0, flat.shape[0], chunk):
        xs = flat[i:i + chunk, None, :]
        kernel = 0.5 * _combined_kernel(xs, y, normals, system.medium, system.stress, system.eta, 'h', SCALE_GREEN)
        out[i:i + chunk] = -np.einsum('pqij,qjr->pir', kernel, weighted)

    out = out.reshape(x.shape[:-1] + (2, phi.shape[-1]))
    return out[..., 0] if single else out


def interpolate_density(boundary: TruncatedBoundary, density: np.ndarray, t) -> np.ndarray:
    """Trigonometric interpolant of the density at parameters t (Nyquist term as a cosine)"""
    Q, n = boundary.Q, boundary.n
    coeffs = np.fft.fft(density, axis=0) / Q
    freqs = np.fft.fftfreq(Q, d=1.0 / Q)
    s = boundary.to_s(np.atleast_1d(t))
    basis = np.exp(1j * np.outer(s, freqs))
    basis[:, n] = np.cos(n * s)
    return np.tensordot(basis, coeffs, axes=(1, 0))


def boundary_residual(system: BIESystem, density: np.ndarray, inc: IncidentWave, t_off) -> np.ndarray:
    """
    Relative boundary-condition error |u^in + u^sc| / |u^in| at off-node surface points

    The trace of the potential is (1/2)[phi(t) + (D - i eta S) phi (t)], with phi
    interpolated trigonometrically and the operator applied with the same split
    quadrature as the matrix.
    """
    boundary = system.boundary
    t_off = np.atleast_1d(np.asarray(t_off, dtype=float))
    offset = np.min(np.abs(t_off[:, None] - boundary.t[None, :]))
    if offset < 1e-9 * boundary.dt:
        raise ValueError("off-node parameters must not coincide with boundary nodes")

    x = np.stack([t_off, np.asarray(boundary.surface.eval(t_off), dtype=float)], axis=-1)
    k1, k2 = _split_kernels(boundary, system.medium, system.stress, system.eta, t_off, x)
    weights_r = _kress_weights_at(boundary.to_s(t_off), boundary.s, boundary.n)
    operator = weights_r[..., None, None] * k1 + (math.pi / boundary.n) * k2
    applied = np.einsum('pqij,qj->pi', operator, density)

    trace = 0.5 * (interpolate_density(boundary, density, t_off) + applied)
    incident = inc.trace(x) * boundary.taper_at(t_off)[:, None]
    return np.linalg.norm(incident - trace, axis=-1) / np.linalg.norm(incident, axis=-1)


# ---------------------------------------------------------------------------
# Flat-surface oracle
# ---------------------------------------------------------------------------

def _vertical(k: float, xi: float) -> complex:
    q = np.sqrt(complex(k * k - xi * xi))
    return q if q.imag >= 0 else -q


def flat_reflection(medium: ElasticMedium, inc: IncidentWave, height: float = 0.0) -> Dict[str, complex]:
    """
    Amplitudes of the reflected P and SV waves off the rigid plane x2 = height

    The reflected field is A (xi, q_p)/kp e^{i xi x1 + i q_p (x2 - c)} + B (-q_s, xi)/ks e^{i xi x1 + i q_s (x2 - c)}.
    """
    d = inc.direction
    if d[1] > 1e-14:
        raise ValueError("flat oracle needs downgoing incidence (d2 <= 0)")
    kp, ks = medium.kp, medium.ks
    xi = inc.wavenumber * d[0]
    q_in = -inc.wavenumber * d[1]
    qp, qs = _vertical(kp, xi), _vertical(ks, xi)

    rhs = -inc.polarization * np.exp(-1j * q_in * height)
    det = (xi * xi + qp * qs) / (kp * ks)
    amp_p = (rhs[0] * xi / ks + rhs[1] * qs / ks) / det
    amp_s = (rhs[1] * xi / kp - rhs[0] * qp / kp) / det

    system = np.array([[xi / kp, -qs / ks], [qp / kp, xi / ks]], dtype=complex)
    check = np.linalg.solve(system, rhs)
    mismatch = float(np.max(np.abs(check - np.array([amp_p, amp_s]))))
    if mismatch > 1e-10 * max(1.0, float(np.max(np.abs(check)))):
        logger.warning(f"Closed-form reflection amplitudes differ from the 2x2 solve by {mismatch:.3e}")

    return {'A': amp_p, 'B': amp_s, 'xi': xi, 'q_p': qp, 'q_s': qs, 'q_in': q_in, 'check': check}


def flat_energy_balance(medium: ElasticMedium, inc: IncidentWave) -> float:
    """Relative mismatch between reflected and incident vertical energy flux (evanescent waves carry none)"""
    coeffs = flat_reflection(medium, inc)
    reflected = (abs(coeffs['A']) ** 2 * coeffs['q_p'].real / medium.kp ** 2
                 + abs(coeffs['B']) ** 2 * coeffs['q_s'].real / medium.ks ** 2)
    incident = coeffs['q_in'] / inc.wavenumber ** 2
    return abs(reflected - incident) / incident


def flat_oracle(medium: ElasticMedium, inc: IncidentWave, x, height: float = 0.0) -> np.ndarray:
    """Closed-form scattered field above the rigid plane x2 = height, shape (..., 2)"""
    x = np.asarray(x, dtype=float)
    c = flat_reflection(medium, inc, height)
    xi, qp, qs = c['xi'], c['q_p'], c['q_s']
    x1, dx2 = x[..., 0], x[..., 1] - height
    pol_p = np.array([xi, qp]) / medium.kp
    pol_s = np.array([-qs, xi]) / medium.ks
    wave_p = c['A'] * np.exp(1j * (xi * x1 + qp * dx2))
    wave_s = c['B'] * np.exp(1j * (xi * x1 + qs * dx2))
    return wave_p[..., None] * pol_p + wave_s[..., None] * pol_s


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass
class NearFieldDataset:
    """u^sc at the 2N+1 line nodes for the M+1 downgoing directions and both wave kinds"""
    medium: ElasticMedium
    line: MeasurementLine
    grid: DirectionGrid
    u_p: np.ndarray
    u_s: np.ndarray
    surface_id: str = ''
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.u_p = np.asarray(self.u_p, dtype=complex)
        self.u_s = np.asarray(self.u_s, dtype=complex)
        expected = (self.line.count, self.grid.M + 1, 2)
        for name, samples in (('u_p', self.u_p), ('u_s', self.u_s)):
            if samples.shape != expected:
                raise ShapeMismatchError(f"{name} has shape {samples.shape}, expected {expected}")

    def samples(self, kind: str) -> np.ndarray:
        return self.u_p if kind.upper() == 'P' else self.u_s

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u_p)) and np.all(np.isfinite(self.u_s)))

    def header(self) -> Dict[str, object]:
        return {
            'medium': self.medium.to_dict(),
            'line': self.line.to_dict(),
            'M': self.grid.M,
            'surface': self.surface_id,
            'metadata': dict(self.metadata),
        }


def _incidents(medium: ElasticMedium, grid: DirectionGrid) -> List[IncidentWave]:
    dirs = grid.directions
    return ([IncidentWave.of('P', d, medium) for d in dirs]
            + [IncidentWave.of('S', d, medium) for d in dirs])


def generate_dataset(surface: SurfaceProfile, medium: ElasticMedium, line: MeasurementLine,
                     grid: DirectionGrid, params: Optional[SolverParams] = None,
                     progress: bool = False) -> NearFieldDataset:
    """One assembly, 2(M+1) solves, field sampled at every measurement node"""
    params = params or SolverParams()
    line.check_above(surface)
    boundary = default_boundary(surface, medium, line.A, params)
    system = assemble(surface, medium, params.coupling(medium), boundary, params)

    incidents = _incidents(medium, grid)
    densities = solve_many(system, incidents, threads=params.threads, progress=progress)
    fields = scattered_field(system, densities, line.nodes)

    count = grid.M + 1
    u_p = fields[..., :count].transpose(0, 2, 1)
    u_s = fields[..., count:].transpose(0, 2, 1)
    metadata = {'assembly_hash': system.assembly_hash, 'boundary': boundary.to_dict(),
                'eta': [system.eta.real, system.eta.imag], 'surface_spec': surface.describe()}
    logger.info(f"Generated dataset for '{surface.id}': {line.count} nodes x {count} directions x 2 kinds")
    return NearFieldDataset(medium, line, grid, u_p, u_s, surface.id, metadata)


def oracle_dataset(medium: ElasticMedium, line: MeasurementLine, grid: DirectionGrid,
                   height: float = 0.0) -> NearFieldDataset:
    """Flat-oracle field sampled on the same geometry as generate_dataset"""
    line.check_above(flat_surface(height))
    count = grid.M + 1
    u_p = np.empty((line.count, count, 2), dtype=complex)
    u_s = np.empty_like(u_p)
    for k, d in enumerate(grid.directions):
        u_p[:, k] = flat_oracle(medium, IncidentWave.of('P', d, medium), line.nodes, height)
        u_s[:, k] = flat_oracle(medium, IncidentWave.of('S', d, medium), line.nodes, height)
    return NearFieldDataset(medium, line, grid, u_p, u_s, 'flat', {'oracle': True, 'height': height})
