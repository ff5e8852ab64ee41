"""
Identity suites run by `validate`

Each suite measures one error against its tolerance and reports it; nothing
here raises on failure.
"""

import math
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from src.forward import (
    IncidentWave, SolverParams, assemble, boundary_residual, default_boundary, flat_energy_balance,
    flat_oracle, oracle_dataset, scattered_field, solve_density, solve_many,
)
from src.greens import (
    f2_audit, funk_hecke_scalar, im_green_closed, im_green_direct, im_green_funk, navier_green, stress_kernel,
    CurvePoint,
)
from src.imaging import PolarizationMode, SamplingGrid, image_grid
from src.medium_geom import DirectionGrid, ElasticMedium, MeasurementLine, flat_surface, surface_registry
from src.specfun import bessel_j, crossover_report, two_branch
from src.synthkit import NoiseSpec, add_noise, load_dataset, save_dataset

TOLERANCES = {
    'bessel_crossover': 1e-9,
    'funk_hecke': 1e-8,
    'im_green_routes': 1e-6,
    'navier_residual': 1e-4,
    'stress_kernel_fd': 1e-5,
    'flat_oracle_energy': 1e-10,
    'flat_oracle_boundary': 1e-12,
    'flat_forward': 2e-2,
    'upgoing_incidence': 2e-2,
    'exact_invariants': 0.0,
}

# measured by the preset experiment runs, listed in the report alongside the suites
EXPERIMENT_CHECKS = {
    'reconstruction_mean_error': (
        0.0785, 'fig4-b without noise: mean argmax error over |z1| <= 4, a quarter shear wavelength at ks = 20'),
    'noise_robustness_ratio': (
        2.0, 'fig6 on f4: mean argmax error at delta = 0.4 over the error at delta = 0, '
             'and at most half a shear wavelength'),
    'polarization_cells': (
        1.0, 'fig7 on f2: Both mean argmax error minus min(E1, E2), in z2 grid cells'),
}


@dataclass
class SuiteResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    seconds: float = 0.0
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def _result(name: str, measured: float, started: float, **details) -> SuiteResult:
    tolerance = TOLERANCES[name]
    measured = float(measured)
    passed = bool(np.isfinite(measured) and measured <= tolerance)
    return SuiteResult(name, measured, tolerance, passed, time.perf_counter() - started, details)


def _random_pairs(rng: np.random.Generator, count: int, k: float, kr_range=(0.1, 40.0)):
    kr = rng.uniform(*kr_range, count)
    angle = rng.uniform(0.0, 2.0 * math.pi, count)
    z = rng.uniform(-2.0, 2.0, (count, 2))
    x = z + (kr / k)[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    return x, z


def suite_bessel_crossover() -> SuiteResult:
    """Series and asymptotic branches agree where they hand over; scipy matches both"""
    started = time.perf_counter()
    worst = crossover_report()
    t = np.linspace(12.0, 16.0, 9)
    library = max(abs(two_branch(n, float(v))[0] - bessel_j(n, float(v))) for n in (0, 1) for v in t)
    return _result('bessel_crossover', max(worst, library), started, branch_gap=worst, library_gap=library)


def suite_funk_hecke(seed: int = 1, count: int = 200, mq: int = 1024) -> SuiteResult:
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    k = rng.uniform(1.0, 30.0, count)
    r = rng.uniform(0.0, 40.0, count) / k
    angle = rng.uniform(0.0, 2.0 * math.pi, count)
    v = r[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    errors = [abs(funk_hecke_scalar(v[i], k[i], mq) - bessel_j(0, k[i] * r[i])) for i in range(count)]
    return _result('funk_hecke', max(errors), started, samples=count, quadrature=mq)


def suite_im_green(medium: ElasticMedium, seed: int = 2, count: int = 100,
                   f1_perturbation: float = 0.0) -> SuiteResult:
    """Direct imaginary part, closed F1/F2 form and plane-wave superposition"""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    x, z = _random_pairs(rng, count, medium.ks)
    direct = im_green_direct(x, z, medium)
    closed = im_green_closed(x, z, medium) + f1_perturbation / (4.0 * medium.mu) * np.eye(2)
    funk = im_green_funk(x, z, medium)
    gaps = {
        'direct_vs_closed': float(np.max(np.abs(direct - closed))),
        'direct_vs_funk': float(np.max(np.abs(direct - funk))),
        'closed_vs_funk': float(np.max(np.abs(closed - funk))),
    }
    audit = f2_audit(medium)
    outcome = 'printed F2 confirmed' if audit['printed'] <= TOLERANCES['im_green_routes'] else 'printed F2 corrected'
    return _result('im_green_routes', max(gaps.values()), started, f2_audit=audit, f2_outcome=outcome, **gaps)


_D1 = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
_D2 = {-2: -1.0, -1: 16.0, 0: -30.0, 1: 16.0, 2: -1.0}


def fd_gradient(func: Callable[[np.ndarray], np.ndarray], p: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences; returns d func / d p_m stacked on a new last axis"""
    parts = []
    for m in range(2):
        step = np.zeros(2)
        step[m] = h
        parts.append(sum(c * func(p + a * step) for a, c in _D1.items()) / (12.0 * h))
    return np.stack(parts, axis=-1)


def fd_hessian(func: Callable[[np.ndarray], np.ndarray], p: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order second derivatives, shape func(p).shape + (2, 2)"""
    e = np.eye(2) * h
    hess = [[None, None], [None, None]]
    for m in range(2):
        hess[m][m] = sum(c * func(p + a * e[m]) for a, c in _D2.items()) / (12.0 * h * h)
    mixed = sum(ca * cb * func(p + a * e[0] + b * e[1]) for a, ca in _D1.items() for b, cb in _D1.items())
    hess[0][1] = hess[1][0] = mixed / (144.0 * h * h)
    return np.stack([np.stack(row, axis=-1) for row in hess], axis=-2)


def suite_navier_residual(medium: ElasticMedium, seed: int = 3, count: int = 20) -> SuiteResult:
    """mu Lap u + (lambda+mu) grad div u + omega^2 u for the columns of Pi(., z)"""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    wl = medium.wavelength_s
    h = wl / 100.0
    worst = 0.0
    for _ in range(count):
        z = rng.uniform(-1.0, 1.0, 2)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        x = z + rng.uniform(1.0, 5.0) * wl * np.array([math.cos(angle), math.sin(angle)])
        hess = fd_hessian(lambda p: navier_green(p, z, medium), x, h)   # [i, j, a, b]
        pi = navier_green(x, z, medium)
        laplacian = hess[:, :, 0, 0] + hess[:, :, 1, 1]
        grad_div = np.einsum('mjim->ij', hess)
        residual = medium.mu * laplacian + (medium.lam + medium.mu) * grad_div + medium.omega ** 2 * pi
        worst = max(worst, float(np.max(np.abs(residual)) / (medium.omega ** 2 * np.max(np.abs(pi)))))
    return _result('navier_residual', worst, started, samples=count, step=h)


def suite_stress_kernel(medium: ElasticMedium, seed: int = 4, count: int = 20) -> SuiteResult:
    """P_y[Pi] against the operator written out on finite-difference derivatives in y"""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    sp = medium.stress_params()
    wl = medium.wavelength_s
    h = wl / 200.0
    worst = 0.0
    for _ in range(count):
        y = rng.uniform(-1.0, 1.0, 2)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        x = y + rng.uniform(0.5, 3.0) * wl * np.array([math.cos(angle), math.sin(angle)])
        theta = rng.uniform(0.0, 2.0 * math.pi)
        n = np.array([math.cos(theta), math.sin(theta)])

        grad = fd_gradient(lambda p: navier_green(x, p, medium), y, h)   # [i, j, m] = d Pi_ij / d y_m
        reference = np.empty((2, 2), dtype=complex)
        for j in range(2):
            du1, du2 = grad[0, j], grad[1, j]
            normal_derivative = np.array([du1 @ n, du2 @ n])
            divergence = du1[0] + du2[1]
            curl = -du1[1] + du2[0]
            reference[:, j] = ((medium.mu + sp.mu_t) * normal_derivative
                               + sp.lambda_t * divergence * n
                               - sp.mu_t * curl * np.array([-n[1], n[0]]))
        analytic = stress_kernel(x, CurvePoint(y, n), medium, sp)
        worst = max(worst, float(np.max(np.abs(analytic - reference)) / np.max(np.abs(reference))))
    return _result('stress_kernel_fd', worst, started, samples=count, step=h)


def _angles(count: int) -> np.ndarray:
    """Incidence angles from the downward vertical, within +-60 degrees"""
    return np.deg2rad(np.linspace(-60.0, 60.0, count))


def _downgoing(angle: float) -> np.ndarray:
    return np.array([math.sin(angle), -math.cos(angle)])


def suite_flat_oracle(medium: ElasticMedium, seed: int = 5) -> List[SuiteResult]:
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    height = 0.3
    energy, boundary = 0.0, 0.0
    for kind in ('P', 'S'):
        for angle in _angles(9):
            inc = IncidentWave.of(kind, _downgoing(angle), medium)
            energy = max(energy, flat_energy_balance(medium, inc))
            pts = np.stack([rng.uniform(-10.0, 10.0, 100), np.full(100, height)], axis=-1)
            total = inc.trace(pts) + flat_oracle(medium, inc, pts, height)
            boundary = max(boundary, float(np.max(np.abs(total))))
    return [
        _result('flat_oracle_energy', energy, started),
        _result('flat_oracle_boundary', boundary, started),
    ]


def suite_flat_forward(medium: ElasticMedium, a: float = 2.0, A: float = 8.0,
                       params: Optional[SolverParams] = None) -> SuiteResult:
    """Nystrom field against the oracle on the central half of the measurement line, 8 angles per kind"""
    started = time.perf_counter()
    params = params or SolverParams()
    surface = flat_surface(0.0)
    boundary = default_boundary(surface, medium, A, params)
    system = assemble(surface, medium, params.coupling(medium), boundary, params)
    line = MeasurementLine(a, A, 100)
    central = line.nodes[np.abs(line.nodes[:, 0]) <= 0.5 * A]

    incidents = [IncidentWave.of(kind, _downgoing(angle), medium)
                 for kind in ('P', 'S') for angle in _angles(8)]
    fields = scattered_field(system, solve_many(system, incidents), central)
    worst = 0.0
    for r, inc in enumerate(incidents):
        exact = flat_oracle(medium, inc, central)
        worst = max(worst, float(np.linalg.norm(fields[..., r] - exact) / np.linalg.norm(exact)))
    return _result('flat_forward', worst, started, Q=boundary.Q, half_width=boundary.half_width)


def suite_upgoing(medium: ElasticMedium, surface_id: str = 'f2', A: float = 8.0,
                  params: Optional[SolverParams] = None) -> SuiteResult:
    """Upgoing incidence on a rigid surface scatters into -u^in"""
    started = time.perf_counter()
    params = params or SolverParams()
    surface = surface_registry(surface_id)
    boundary = default_boundary(surface, medium, A, params)
    system = assemble(surface, medium, params.coupling(medium), boundary, params)

    worst, residual_worst = 0.0, 0.0
    x1 = np.linspace(-0.25 * A, 0.25 * A, 41)
    pts = np.stack([x1, np.full_like(x1, surface.f_sup + 0.5)], axis=-1)
    t_off = 0.5 * (boundary.t[:-1] + boundary.t[1:])
    t_off = t_off[np.abs(t_off) <= 0.25 * A]
    for kind in ('P', 'S'):
        d = np.array([math.sin(math.radians(10.0)), math.cos(math.radians(10.0))])
        inc = IncidentWave.of(kind, d, medium)
        phi = solve_density(system, inc)
        u = scattered_field(system, phi, pts)
        expected = -inc.trace(pts)
        worst = max(worst, float(np.linalg.norm(u - expected) / np.linalg.norm(expected)))
        residual_worst = max(residual_worst, float(np.max(boundary_residual(system, phi, inc, t_off))))
    return _result('upgoing_incidence', worst, started, boundary_residual=residual_worst, surface=surface_id)


def suite_exact_invariants(medium: ElasticMedium, seed: int = 6) -> SuiteResult:
    """Count of violated exact identities on a small flat-oracle dataset"""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    dataset = oracle_dataset(medium, MeasurementLine(1.0, 2.0, 20), DirectionGrid(16))
    grid = SamplingGrid(-1.0, 1.0, 0.0, 0.8, 9, 17)
    failed = []

    both = image_grid(grid, dataset, mode=PolarizationMode.BOTH, threads=1)
    if np.min(both.values) < 0:
        failed.append('nonnegative')
    e1 = both.with_mode(PolarizationMode.E1).values
    e2 = both.with_mode(PolarizationMode.E2).values
    if not np.array_equal(both.values, e1 + e2):
        failed.append('both_is_sum')

    c = complex(*rng.uniform(0.2, 3.0, 2))
    scaled = replace(dataset, u_p=c * dataset.u_p, u_s=c * dataset.u_s)
    joint = image_grid(grid, scaled, mirror_weight=c, threads=1)
    if not np.array_equal(np.argmax(joint.values, axis=1), np.argmax(both.values, axis=1)):
        failed.append('joint_scaling')

    clean = add_noise(dataset, NoiseSpec(delta=0.0, seed=seed))
    if not (np.array_equal(clean.u_p, dataset.u_p) and np.array_equal(clean.u_s, dataset.u_s)):
        failed.append('zero_noise')

    with tempfile.TemporaryDirectory() as tmp:
        loaded = load_dataset(save_dataset(dataset, f"{tmp}/invariants.nfd"))
    if loaded.u_p.tobytes() != dataset.u_p.tobytes() or loaded.u_s.tobytes() != dataset.u_s.tobytes():
        failed.append('round_trip')
    return _result('exact_invariants', len(failed), started, failed=failed, scaling=[c.real, c.imag])


def experiment_checks() -> List[Dict[str, object]]:
    """Tolerances checked by the preset runs (`sweep` / `image`), not by this module"""
    return [{'name': name, 'tolerance': tolerance, 'check': text, 'measured_by': 'experiment presets'}
            for name, (tolerance, text) in EXPERIMENT_CHECKS.items()]


def run_validation(medium: Optional[ElasticMedium] = None, quick: bool = False,
                   f1_perturbation: float = 0.0) -> List[SuiteResult]:
    """All suites; quick mode skips the two solver runs"""
    medium = medium or ElasticMedium(1.0, 1.0, 20.0)
    results = [
        suite_bessel_crossover(),
        suite_funk_hecke(),
        suite_im_green(medium, f1_perturbation=f1_perturbation),
        suite_navier_residual(medium),
        suite_stress_kernel(medium),
    ]
    results.extend(suite_flat_oracle(medium))
    results.append(suite_exact_invariants(medium))
    if not quick:
        results.append(suite_flat_forward(medium))
        results.append(suite_upgoing(medium))
    for r in results:
        status = 'pass' if r.passed else 'FAIL'
        logger.info(f"[{status}] {r.name}: {r.measured:.3e} (tolerance {r.tolerance:.0e}, {r.seconds:.2f}s)")
    return results
