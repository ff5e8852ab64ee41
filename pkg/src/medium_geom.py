"""
Elastic medium, rough-surface profiles, measurement line and incident-direction grids
"""

import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.errors import GeometryError, InvalidGridError, RegistryError


@dataclass(frozen=True)
class StressParams:
    """Coefficients (mu_t, lambda_t) of the generalised stress operator"""
    mu_t: float
    lambda_t: float


@dataclass(frozen=True)
class ElasticMedium:
    """Homogeneous isotropic medium with unit density"""
    lam: float
    mu: float
    omega: float

    def __post_init__(self):
        if self.mu <= 0:
            raise GeometryError(f"shear modulus must be positive, got {self.mu}")
        if self.lam + self.mu < 0:
            raise GeometryError(f"lambda + mu must be >= 0, got {self.lam + self.mu}")
        if self.omega <= 0:
            raise GeometryError(f"angular frequency must be positive, got {self.omega}")

    @property
    def kp(self) -> float:
        return self.omega / math.sqrt(self.lam + 2.0 * self.mu)

    @property
    def ks(self) -> float:
        return self.omega / math.sqrt(self.mu)

    @property
    def wavelength_s(self) -> float:
        return 2.0 * math.pi / self.ks

    @property
    def wavelength_p(self) -> float:
        return 2.0 * math.pi / self.kp

    def stress_params(self) -> StressParams:
        """The special choice that removes the Cauchy part of the double-layer kernel"""
        lam, mu = self.lam, self.mu
        return StressParams(
            mu_t=mu * (mu + lam) / (3.0 * mu + lam),
            lambda_t=(2.0 * mu + lam) * (mu + lam) / (3.0 * mu + lam),
        )

    def to_dict(self) -> Dict[str, float]:
        return {'lambda': self.lam, 'mu': self.mu, 'omega': self.omega}


# ---------------------------------------------------------------------------
# Surface profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """One term of a profile expression: constant, amp*sin(freq*x+phase) or amp*cos(...)"""
    kind: str
    amp: float
    freq: float = 0.0
    phase: float = 0.0

    def value(self, x: np.ndarray) -> np.ndarray:
        if self.kind == 'const':
            return np.full_like(x, self.amp, dtype=float)
        arg = self.freq * x + self.phase
        if self.kind == 'sin':
            return self.amp * np.sin(arg)
        return self.amp * np.cos(arg)

    def deriv(self, x: np.ndarray) -> np.ndarray:
        if self.kind == 'const':
            return np.zeros_like(x, dtype=float)
        arg = self.freq * x + self.phase
        if self.kind == 'sin':
            return self.amp * self.freq * np.cos(arg)
        return -self.amp * self.freq * np.sin(arg)

    def deriv2(self, x: np.ndarray) -> np.ndarray:
        if self.kind == 'const':
            return np.zeros_like(x, dtype=float)
        return -self.freq ** 2 * self.value(x)

    def bound(self) -> float:
        return self.amp if self.kind == 'const' else abs(self.amp)

    def describe(self) -> str:
        if self.kind == 'const':
            return repr(self.amp)
        return f"{self.amp!r}*{self.kind}({self.freq!r}*x{self.phase:+})"


def _sum_terms(terms: Sequence[Term], x: np.ndarray, which: str) -> np.ndarray:
    total = np.zeros_like(x, dtype=float)
    for term in terms:
        total = total + getattr(term, which)(x)
    return total


@dataclass(frozen=True)
class SurfaceProfile:
    """Graph x2 = f(x1), optionally split at x1 = split into a left and a right expression"""
    id: str
    terms: Tuple[Term, ...]
    split: Optional[float] = None
    terms_right: Tuple[Term, ...] = ()

    def _piecewise(self, x1, which: str):
        x = np.asarray(x1, dtype=float)
        left = _sum_terms(self.terms, x, which)
        if self.split is None:
            out = left
        else:
            right = _sum_terms(self.terms_right, x, which)
            out = np.where(x < self.split, left, right)
        return out.item() if out.ndim == 0 else out

    def eval(self, x1):
        return self._piecewise(x1, 'value')

    def deriv(self, x1):
        """f'(x1); one-sided values at the junction (the right piece applies at x1 = split)"""
        return self._piecewise(x1, 'deriv')

    def deriv2(self, x1):
        return self._piecewise(x1, 'deriv2')

    def curvature(self, x1):
        """Signed curvature f'' / (1 + f'^2)^(3/2), positive where the graph bends upward"""
        fp = np.asarray(self.deriv(x1), dtype=float)
        out = np.asarray(self.deriv2(x1), dtype=float) / (1.0 + fp ** 2) ** 1.5
        return out.item() if out.ndim == 0 else out

    @property
    def f_sup(self) -> float:
        """Envelope bound const + sum |amp|, never below any value of f"""
        def envelope(terms):
            return sum(t.bound() for t in terms)
        bound = envelope(self.terms)
        if self.split is not None:
            bound = max(bound, envelope(self.terms_right))
        return float(bound)

    @property
    def f_inf(self) -> float:
        def envelope(terms):
            return sum(t.amp if t.kind == 'const' else -abs(t.amp) for t in terms)
        bound = envelope(self.terms)
        if self.split is not None:
            bound = min(bound, envelope(self.terms_right))
        return float(bound)

    def describe(self) -> Dict[str, str]:
        """Expression-spec form, readable back by parse_surface"""
        spec = {'expr': ' + '.join(t.describe() for t in self.terms)}
        if self.split is not None:
            spec['split'] = repr(self.split)
            spec['expr_right'] = ' + '.join(t.describe() for t in self.terms_right)
        return spec


_NUMBER = r'[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?'
_TERM_RE = re.compile(
    r'^(?P<amp>{n})\s*\*\s*(?P<kind>sin|cos)\(\s*(?P<freq>{n})\s*\*\s*x\s*(?P<phase>[-+]\s*{n})?\s*\)$'.format(n=_NUMBER)
)
_CONST_RE = re.compile(r'^{n}$'.format(n=_NUMBER))


def _signed(text: str) -> float:
    """Float from a sign-prefixed number, tolerating doubled signs such as '+-1.5'"""
    text = text.replace(' ', '')
    negative = text.count('-') % 2 == 1
    value = float(text.lstrip('+-'))
    return -value if negative else value


def _split_terms(expr: str) -> List[str]:
    """Split on top-level '+' / '-' while keeping signs and parenthesised groups intact"""
    pieces, depth, current = [], 0, ''
    text = expr.replace(' ', '')
    for i, ch in enumerate(text):
        if ch == '(':
            depth += 1
        elif ch == ')':
            depth -= 1
        is_sign = ch in '+-' and depth == 0 and i > 0 and text[i - 1] not in 'eE*('
        if is_sign:
            pieces.append(current)
            current = '' if ch == '+' else '-'
        else:
            current += ch
    pieces.append(current)
    return [p for p in pieces if p]


def parse_terms(expr: str) -> Tuple[Term, ...]:
    """Parse 'c + a*sin(w*x+p) - b*cos(w*x)' into terms"""
    terms = []
    for piece in _split_terms(expr):
        if _CONST_RE.match(piece):
            terms.append(Term('const', float(piece)))
            continue
        negate = False
        if piece.startswith('-') and not _TERM_RE.match(piece):
            negate, piece = True, piece[1:]
        match = _TERM_RE.match(piece)
        if not match:
            raise RegistryError(f"cannot parse surface term '{piece}' in '{expr}'")
        amp = float(match.group('amp'))
        phase = _signed(match.group('phase')) if match.group('phase') else 0.0
        terms.append(Term(match.group('kind'), -amp if negate else amp, float(match.group('freq')), phase))
    if not terms:
        raise RegistryError(f"empty surface expression '{expr}'")
    return tuple(terms)


def parse_surface(expr: str, split: Optional[float] = None, expr_right: Optional[str] = None,
                  surface_id: str = 'custom') -> SurfaceProfile:
    """Build a custom profile from the expression grammar"""
    if split is not None and expr_right is None:
        raise RegistryError("a split point needs an expr_right")
    right = parse_terms(expr_right) if split is not None else ()
    return SurfaceProfile(surface_id, parse_terms(expr), split, right)


def _registry() -> Dict[str, SurfaceProfile]:
    pi = math.pi
    return {
        'f1': SurfaceProfile(
            'f1',
            (Term('const', 0.42), Term('cos', -0.1, 0.75), Term('cos', -0.05, 7.0)),
            split=4.0,
            terms_right=(Term('const', 0.55),),
        ),
        'f2': SurfaceProfile('f2', (Term('const', 0.5), Term('sin', 0.14, 0.7 * pi, 0.7 * pi * 0.6))),
        'f3': SurfaceProfile('f3', (Term('const', 0.5), Term('sin', 0.16, pi), Term('sin', 0.1, 0.5 * pi))),
        'f4': SurfaceProfile('f4', (
            Term('const', 0.5),
            Term('sin', 0.084, 0.6 * pi),
            Term('sin', 0.084, 0.48 * pi),
            Term('sin', 0.03, 1.5 * pi, -1.5 * pi),
        )),
    }


SURFACES = _registry()


def flat_surface(height: float = 0.0) -> SurfaceProfile:
    return SurfaceProfile('flat', (Term('const', float(height)),))


def surface_registry(surface_id: str, custom: Optional[Dict[str, str]] = None) -> SurfaceProfile:
    """
    Look up a profile by id ('f1'..'f4', 'flat') or build one from a custom spec

    Args:
        surface_id: registry key
        custom: {'expr': ..., 'split': ..., 'expr_right': ...} for custom profiles

    Returns:
        SurfaceProfile
    """
    if custom:
        split = custom.get('split')
        return parse_surface(
            custom['expr'],
            float(split) if split not in (None, '') else None,
            custom.get('expr_right'),
            surface_id=surface_id or 'custom',
        )
    if surface_id in SURFACES:
        return SURFACES[surface_id]
    if surface_id == 'flat':
        return flat_surface(0.0)
    raise RegistryError(f"unknown surface id '{surface_id}' (known: {', '.join(sorted(SURFACES))}, flat)")


# ---------------------------------------------------------------------------
# Directions
# ---------------------------------------------------------------------------

def perp(d: np.ndarray) -> np.ndarray:
    """Rotate by +pi/2: (d1, d2) -> (-d2, d1); works on (..., 2) arrays"""
    d = np.asarray(d)
    return np.stack([-d[..., 1], d[..., 0]], axis=-1)


def mirror_point(x: np.ndarray) -> np.ndarray:
    """(x1, x2) -> (x1, -x2)"""
    x = np.asarray(x)
    return np.stack([x[..., 0], -x[..., 1]], axis=-1)


def mirror_dir(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (d', (d')^perp) = ((d1, -d2), (d2, d1))"""
    d = np.asarray(d)
    return mirror_point(d), np.stack([d[..., 1], d[..., 0]], axis=-1)


@dataclass(frozen=True)
class DirectionGrid:
    """
    Uniform grid over the lower half circle

    d_k = (cos t_k, sin t_k), t_k = -pi + k*pi/M, k = 0..M, sweeping
    (-1, 0) -> (0, -1) -> (1, 0) with grazing endpoints.
    """
    M: int

    def __post_init__(self):
        if self.M < 2 or self.M % 2:
            raise InvalidGridError(f"direction count M must be even and >= 2, got {self.M}")

    @property
    def delta_theta(self) -> float:
        return math.pi / self.M

    @property
    def angles(self) -> np.ndarray:
        return -math.pi + self.delta_theta * np.arange(self.M + 1)

    @property
    def directions(self) -> np.ndarray:
        theta = self.angles
        d = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        half = self.M // 2
        d[0] = (-1.0, 0.0)
        d[half] = (0.0, -1.0)
        # mirror the left half so the grid is exactly symmetric about the vertical axis
        d[half + 1:, 0] = -d[half - 1::-1, 0]
        d[half + 1:, 1] = d[half - 1::-1, 1]
        return d

    @property
    def perp_directions(self) -> np.ndarray:
        return perp(self.directions)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.M + 1, self.delta_theta)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def upper(self) -> np.ndarray:
        """The S+ grid: reflection of every direction across the horizontal axis"""
        return mirror_point(self.directions)


def direction_grid(M: int) -> DirectionGrid:
    return DirectionGrid(M)


@dataclass(frozen=True)
class MeasurementLine:
    """Segment {x2 = a, |x1| <= A} split into 2N subintervals of width h = A/N"""
    a: float
    A: float
    N: int

    def __post_init__(self):
        if self.A <= 0:
            raise GeometryError(f"half-length A must be positive, got {self.A}")
        if self.N < 1:
            raise GeometryError(f"N must be >= 1, got {self.N}")

    @property
    def h(self) -> float:
        return self.A / self.N

    @property
    def count(self) -> int:
        return 2 * self.N + 1

    @property
    def nodes(self) -> np.ndarray:
        x1 = -self.A + self.h * np.arange(self.count)
        x1[-1] = self.A
        return np.stack([x1, np.full_like(x1, self.a)], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.count, self.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def check_above(self, surface: SurfaceProfile):
        if self.a <= surface.f_sup:
            raise GeometryError(
                f"measurement height a={self.a} must exceed sup f = {surface.f_sup:.6g} of surface '{surface.id}'"
            )
        logger.debug(f"Measurement line a={self.a} clears surface '{surface.id}' (sup f={surface.f_sup:.4f})")

    def to_dict(self) -> Dict[str, float]:
        return {'a': self.a, 'A': self.A, 'N': self.N}
