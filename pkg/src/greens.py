"""
Free-space Green's tensor of the 2D Navier equation and its generalised-stress kernel

Pi(x, z) = (1/mu) I Phi_ks + (1/omega^2) grad grad^T (Phi_ks - Phi_kp) is reduced to
Pi = a(r) I + b(r) rh rh^T with r = |x - z|, rh = (x - z)/r, where a and b are
combinations of Z0, Z1 evaluated at kp*r and ks*r:

    a = s * [ Z0(ks r)/mu - (ks Z1(ks r) - kp Z1(kp r)) / (omega^2 r) ]
    b = s * [ 2 (ks Z1(ks r) - kp Z1(kp r)) / r - ks^2 Z0(ks r) + kp^2 Z0(kp r) ] / omega^2

With Z = H^(1) and s = i/4 this is Pi itself; with Z = J and s = 1/4 it is Im Pi;
with Z = J and s = -1/(2 pi) it is the coefficient of ln r in Pi. The same
code path therefore serves the kernels, the imaginary part and the
logarithmic splitting used by the Nystrom solver.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from loguru import logger

from src.errors import QuadratureResidueError, SingularPointError
from src.medium_geom import ElasticMedium, StressParams
from src.specfun import EULER_GAMMA, bessel_j, hankel1

SCALE_GREEN = 0.25j
SCALE_IMAG = 0.25
SCALE_LOG = -0.5 / math.pi

_EYE = np.eye(2)


@dataclass(frozen=True)
class CurvePoint:
    """Source point on a curve with its unit normal (arrays of shape (..., 2) are allowed)"""
    y: np.ndarray
    normal: np.ndarray


def _cylinder(kind: str, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if kind == 'h':
        return hankel1(0, z), hankel1(1, z)
    return bessel_j(0, z), bessel_j(1, z)


def _separation(x, z) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    v = x - z
    return v, np.sqrt(np.sum(v * v, axis=-1))


def radial_parts(r: np.ndarray, medium: ElasticMedium, kind: str = 'h', scale: complex = SCALE_GREEN):
    """
    Radial functions a, b and their r-derivatives

    Args:
        r: separations (> 0 for kind 'h')
        medium: elastic medium
        kind: 'h' for Hankel, 'j' for Bessel J
        scale: overall prefactor s

    Returns:
        (a, b, da, db) arrays shaped like r
    """
    kp, ks = medium.kp, medium.ks
    om2 = medium.omega ** 2
    mu = medium.mu

    r = np.asarray(r, dtype=float)
    zero = r == 0
    if kind == 'h' and np.any(zero):
        raise SingularPointError("Green's tensor is singular at coincident points")
    rs = np.where(zero, 1.0, r)

    zs0, zs1 = _cylinder(kind, ks * rs)
    zp0, zp1 = _cylinder(kind, kp * rs)
    qs = ks * zs1 / rs
    qp = kp * zp1 / rs
    dqs = ks ** 2 * zs0 / rs - 2.0 * qs / rs
    dqp = kp ** 2 * zp0 / rs - 2.0 * qp / rs

    a = zs0 / mu - (qs - qp) / om2
    b = (2.0 * (qs - qp) - ks ** 2 * zs0 + kp ** 2 * zp0) / om2
    da = -ks * zs1 / mu - (dqs - dqp) / om2
    db = (2.0 * (dqs - dqp) + ks ** 3 * zs1 - kp ** 3 * zp1) / om2

    if np.any(zero):
        # J-type limits: J1(kr)/r -> k/2, b and all derivatives vanish
        a = np.where(zero, 1.0 / mu - (ks ** 2 - kp ** 2) / (2.0 * om2), a)
        b = np.where(zero, 0.0, b)
        da = np.where(zero, 0.0, da)
        db = np.where(zero, 0.0, db)

    return scale * a, scale * b, scale * da, scale * db


def _assemble_tensor(v, r, a, b) -> np.ndarray:
    rs = np.where(r == 0, 1.0, r)
    rh = v / rs[..., None]
    outer = rh[..., :, None] * rh[..., None, :]
    return a[..., None, None] * _EYE + b[..., None, None] * outer


def green_tensor(x, z, medium: ElasticMedium, kind: str = 'h', scale: complex = SCALE_GREEN) -> np.ndarray:
    """a I + b rh rh^T for any (kind, scale) pair; shape (..., 2, 2)"""
    v, r = _separation(x, z)
    a, b, _, _ = radial_parts(r, medium, kind, scale)
    return _assemble_tensor(v, r, a, b)


def phi_k(x, z, k: float):
    """Helmholtz fundamental solution (i/4) H0(k|x - z|)"""
    _, r = _separation(x, z)
    if np.any(r == 0):
        raise SingularPointError("Phi_k is singular at x = z")
    return 0.25j * hankel1(0, k * r)


def navier_green(x, z, medium: ElasticMedium) -> np.ndarray:
    """Green's tensor Pi(x, z), complex (..., 2, 2)"""
    return green_tensor(x, z, medium, 'h', SCALE_GREEN)


def green_gradient(x, z, medium: ElasticMedium, kind: str = 'h', scale: complex = SCALE_GREEN) -> np.ndarray:
    """
    G[..., i, j, m] = d Pi_ij / d z_m (derivative in the second argument)
    """
    v, r = _separation(x, z)
    a, b, da, db = radial_parts(r, medium, kind, scale)
    rs = np.where(r == 0, 1.0, r)
    rh = v / rs[..., None]

    t1 = da[..., None, None, None] * _EYE[:, :, None] * rh[..., None, None, :]
    t2 = (db - 2.0 * b / rs)[..., None, None, None] * (
        rh[..., :, None, None] * rh[..., None, :, None] * rh[..., None, None, :]
    )
    t3 = (b / rs)[..., None, None, None] * (
        _EYE[:, None, :] * rh[..., None, :, None] + rh[..., :, None, None] * _EYE[None, :, :]
    )
    # d/dz = -d/dv
    return -(t1 + t2 + t3)


def apply_stress(grad: np.ndarray, normal: np.ndarray, medium: ElasticMedium,
                 sp: Optional[StressParams] = None) -> np.ndarray:
    """
    Apply P = (mu + mu_t) d/dn + lambda_t n div - mu_t n^perp div^perp column by column

    Args:
        grad: G[..., i, j, m] = d u^(j)_i / d y_m for the columns u^(j)
        normal: unit normals (..., 2)
    """
    sp = sp or medium.stress_params()
    n = np.broadcast_to(np.asarray(normal, dtype=float), grad.shape[:-3] + (2,))
    n_perp = np.stack([-n[..., 1], n[..., 0]], axis=-1)

    normal_deriv = np.einsum('...ijm,...m->...ij', grad, n)
    divergence = np.einsum('...mjm->...j', grad)
    # div^perp u = -d2 u1 + d1 u2
    curl = grad[..., 1, :, 0] - grad[..., 0, :, 1]

    return ((medium.mu + sp.mu_t) * normal_deriv
            + sp.lambda_t * n[..., :, None] * divergence[..., None, :]
            - sp.mu_t * n_perp[..., :, None] * curl[..., None, :])


def stress_kernel(x, yp: CurvePoint, medium: ElasticMedium, sp: Optional[StressParams] = None,
                  kind: str = 'h', scale: complex = SCALE_GREEN) -> np.ndarray:
    """P_y applied to each column of Pi(x, y) at the curve point yp"""
    grad = green_gradient(x, yp.y, medium, kind, scale)
    return apply_stress(grad, yp.normal, medium, sp)


# ---------------------------------------------------------------------------
# Imaginary part: three routes
# ---------------------------------------------------------------------------

def im_green_direct(x, z, medium: ElasticMedium) -> np.ndarray:
    """Route (a): Im of navier_green"""
    return np.imag(navier_green(x, z, medium))


def f1_f2(t, medium: ElasticMedium, printed: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Radial profiles of Im Pi = (1/(4 mu)) [F1 I + F2 rh rh^T]

    The printed closed form carries -(kp/t) J1(kp t) in F2; expanding the
    double gradient gives -(2 kp/(ks^2 t)) J1(kp t) instead. printed=True
    evaluates the printed variant for the audit.
    """
    kp, ks = medium.kp, medium.ks
    t = np.asarray(t, dtype=float)
    zero = t == 0
    ts = np.where(zero, 1.0, t)
    zs, zp = ks * ts, kp * ts
    ratio = (kp / ks) ** 2

    j0s, j1s = bessel_j(0, zs), bessel_j(1, zs)
    j0p, j1p = bessel_j(0, zp), bessel_j(1, zp)
    j1s_over = np.where(zero, 0.5, j1s / zs)
    j1p_over = np.where(zero, 0.5, j1p / zp)
    j0s = np.where(zero, 1.0, j0s)
    j0p = np.where(zero, 1.0, j0p)

    f1 = j0s - j1s_over + ratio * j1p_over
    if printed:
        f2 = 2.0 * j1s_over - j0s - kp ** 2 * j1p_over + ratio * j0p
    else:
        f2 = 2.0 * j1s_over - j0s - 2.0 * ratio * j1p_over + ratio * j0p
    return f1, f2


def im_green_closed(x, z, medium: ElasticMedium, printed: bool = False) -> np.ndarray:
    """Route (b): closed form in F1, F2; coincident points take the r -> 0 limit"""
    v, r = _separation(x, z)
    f1, f2 = f1_f2(r, medium, printed)
    return _assemble_tensor(v, r, f1 / (4.0 * medium.mu), f2 / (4.0 * medium.mu))


def _circle(mq: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(mq) / mq
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def funk_hecke_scalar(v, k: float, mq: int = 1024) -> np.ndarray:
    """(1/2pi) * trapezoid over the circle of exp(i k v.d); equals J0(k|v|)"""
    d = _circle(mq)
    phase = np.exp(1j * k * np.einsum('...i,qi->...q', np.asarray(v, dtype=float), d))
    return phase.mean(axis=-1)


def im_green_funk(x, z, medium: ElasticMedium, mq: int = 1024, residue_tol: float = 1e-12) -> np.ndarray:
    """
    Route (c): plane-wave superposition of Im Pi over the full circle

    Raises QuadratureResidueError if the antipodal cancellation leaves an
    imaginary part above residue_tol.
    """
    if mq < 8 or mq % 2:
        raise ValueError(f"quadrature count must be even and >= 8, got {mq}")
    v, _ = _separation(x, z)
    d = _circle(mq)
    dd = d[:, :, None] * d[:, None, :]
    proj = np.einsum('...i,qi->...q', v, d)
    ep = np.exp(1j * medium.kp * proj)
    es = np.exp(1j * medium.ks * proj)

    weight = 2.0 * math.pi / mq
    p_part = np.einsum('...q,qij->...ij', ep, dd)
    s_part = np.einsum('...q,qij->...ij', es, _EYE - dd)
    total = weight / (8.0 * math.pi) * (p_part / (medium.lam + 2.0 * medium.mu) + s_part / medium.mu)

    residue = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if residue > residue_tol:
        raise QuadratureResidueError(f"imaginary residue {residue:.3e} exceeds {residue_tol:.1e}")
    return total.real


def im_green_at_coincidence(medium: ElasticMedium) -> np.ndarray:
    """Im Pi(x, x) = (1/8) (1/mu + 1/(lambda + 2 mu)) I"""
    return 0.125 * (1.0 / medium.mu + 1.0 / (medium.lam + 2.0 * medium.mu)) * _EYE


def f2_audit(medium: ElasticMedium, pairs: int = 100, seed: int = 7, mq: int = 1024) -> Dict[str, float]:
    """Largest entrywise deviation of the printed and corrected closed forms from route (c)"""
    rng = np.random.default_rng(seed)
    wl = medium.wavelength_s
    sep = rng.uniform(0.05 * wl, 40.0 * wl, pairs)
    ang = rng.uniform(0.0, 2.0 * math.pi, pairs)
    z = rng.uniform(-1.0, 1.0, (pairs, 2))
    x = z + sep[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    reference = im_green_funk(x, z, medium, mq)
    printed = float(np.max(np.abs(im_green_closed(x, z, medium, printed=True) - reference)))
    corrected = float(np.max(np.abs(im_green_closed(x, z, medium) - reference)))
    logger.info(f"F2 audit: printed form deviates by {printed:.3e}, corrected form by {corrected:.3e}")
    return {'printed': printed, 'corrected': corrected}


# ---------------------------------------------------------------------------
# Small-separation limits used for the Nystrom diagonal
# ---------------------------------------------------------------------------

def kelvin_constants(medium: ElasticMedium) -> Tuple[float, float]:
    """(c1, c2) of the static tensor -c1 ln r I + c2 rh rh^T"""
    lam, mu = medium.lam, medium.mu
    denom = 4.0 * math.pi * mu * (lam + 2.0 * mu)
    return (lam + 3.0 * mu) / denom, (lam + mu) / denom


def green_regular_limit(medium: ElasticMedium) -> Tuple[complex, float]:
    """
    (a_reg, b0) with Pi + (2/pi) Im Pi ln r -> a_reg I + b0 T T^T as r -> 0 along tangent T
    """
    kp, ks = medium.kp, medium.ks
    om2 = medium.omega ** 2
    mu = medium.mu
    dk2 = ks ** 2 - kp ** 2
    a_reg = (
        0.25j / mu
        - (math.log(ks / 2.0) + EULER_GAMMA) / (2.0 * math.pi * mu)
        - 1j * dk2 / (8.0 * om2)
        + (ks ** 2 * math.log(ks / 2.0) - kp ** 2 * math.log(kp / 2.0)) / (4.0 * math.pi * om2)
        - (1.0 - 2.0 * EULER_GAMMA) * dk2 / (8.0 * math.pi * om2)
    )
    b0 = dk2 / (4.0 * math.pi * om2)
    return a_reg, b0


def kelvin_double_layer_limit(medium: ElasticMedium, curvature, tangent,
                              sp: Optional[StressParams] = None) -> np.ndarray:
    """
    On-curve limit of 2 P_y[Pi](x, y) as y -> x along a graph curve

    Args:
        curvature: signed curvature f''/J^3 at the point(s), J = sqrt(1 + f'^2)
        tangent: unit tangent (..., 2)

    Returns:
        (..., 2, 2) real tensor curvature * [(mu c1 - mu_t c2) I + 2 (mu + mu_t) c2 T T^T]
    """
    sp = sp or medium.stress_params()
    c1, c2 = kelvin_constants(medium)
    factor = np.asarray(curvature, dtype=float)
    tangent = np.asarray(tangent, dtype=float)
    tt = tangent[..., :, None] * tangent[..., None, :]
    body = (medium.mu * c1 - sp.mu_t * c2) * _EYE + 2.0 * (medium.mu + sp.mu_t) * c2 * tt
    return factor[..., None, None] * body
