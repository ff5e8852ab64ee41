"""
Direct imaging of the rough surface from near-field data

For every sampling point z and polarization e_j the scattered field of the
point-source-like incidence Im(Pi(x, z) e_j) is synthesized from the data
(downgoing directions) plus the mirror term (upgoing directions, known in
closed form for a rigid surface), and the indicator sums |U^sc|^2 over the
measurement line.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from config.config import Config
from src.errors import DatasetFormatError, GeometryMismatchError, InvalidGridError, ShapeMismatchError
from src.forward import NearFieldDataset
from src.medium_geom import DirectionGrid, ElasticMedium, MeasurementLine, SurfaceProfile, mirror_dir, mirror_point

Z_CHUNK = 256
METRIC_WINDOW = 4.0


class PolarizationMode(str, Enum):
    E1 = 'E1'
    E2 = 'E2'
    BOTH = 'Both'

    @property
    def indices(self) -> Tuple[int, ...]:
        return {'E1': (0,), 'E2': (1,), 'Both': (0, 1)}[self.value]

    @classmethod
    def parse(cls, value) -> 'PolarizationMode':
        if isinstance(value, cls):
            return value
        for mode in cls:
            if mode.value.lower() == str(value).strip().lower():
                return mode
        raise ValueError(f"unknown polarization mode '{value}' (use E1, E2 or Both)")


@dataclass(frozen=True)
class SamplingGrid:
    """G1 x G2 points on [z1_min, z1_max] x [z2_min, z2_max]"""
    z1_min: float = -5.0
    z1_max: float = 5.0
    z2_min: float = 0.0
    z2_max: float = 1.2
    G1: int = 201
    G2: int = 61

    def __post_init__(self):
        if self.G1 < 2 or self.G2 < 2:
            raise InvalidGridError(f"sampling counts must be >= 2, got {self.G1}x{self.G2}")
        if self.z1_max <= self.z1_min or self.z2_max <= self.z2_min:
            raise InvalidGridError("sampling rectangle must have positive extent")

    @property
    def z1(self) -> np.ndarray:
        return np.linspace(self.z1_min, self.z1_max, self.G1)

    @property
    def z2(self) -> np.ndarray:
        return np.linspace(self.z2_min, self.z2_max, self.G2)

    @property
    def points(self) -> np.ndarray:
        """(G1, G2, 2), first index along z1"""
        z1, z2 = np.meshgrid(self.z1, self.z2, indexing='ij')
        return np.stack([z1, z2], axis=-1)

    def to_dict(self) -> Dict[str, float]:
        return {
            'z1_min': self.z1_min, 'z1_max': self.z1_max, 'z2_min': self.z2_min, 'z2_max': self.z2_max,
            'G1': self.G1, 'G2': self.G2,
        }


@dataclass
class ImagingResult:
    """Indicator planes per polarization; `values` combines them according to `mode`"""
    grid: SamplingGrid
    planes: np.ndarray
    mode: PolarizationMode = PolarizationMode.BOTH
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        if self.mode is PolarizationMode.BOTH:
            return self.planes[0] + self.planes[1]
        return self.planes[self.mode.indices[0]]

    def with_mode(self, mode) -> 'ImagingResult':
        return ImagingResult(self.grid, self.planes, PolarizationMode.parse(mode), dict(self.metadata))

    def argmax_curve(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-column maximizer over z2; ties resolve to the lowest index"""
        rows = np.argmax(self.values, axis=1)
        return self.grid.z1, self.grid.z2[rows]


@dataclass
class SurfaceEstimate:
    z1: np.ndarray
    z2: np.ndarray
    mean_error: Optional[float] = None
    max_error: Optional[float] = None
    window: float = METRIC_WINDOW


# ---------------------------------------------------------------------------
# Pointwise forms
# ---------------------------------------------------------------------------

def _upper_weights(grid: DirectionGrid) -> Tuple[np.ndarray, np.ndarray]:
    return grid.upper(), grid.weights


def mirror_term(x, z, j: int, medium: ElasticMedium, grid: DirectionGrid) -> np.ndarray:
    """
    Upgoing-incidence contribution to U^sc(x; z, e_j)

    On a rigid surface an upgoing plane wave scatters into minus itself, so
    (1/8pi)[(1/(lambda+2mu)) int_{S+} -d d_j e^{ikp(x-z).d} + (1/mu) int_{S+} -d^perp d^perp_j e^{iks(x-z).d}]
    """
    d, w = _upper_weights(grid)
    d_perp = np.stack([-d[:, 1], d[:, 0]], axis=-1)
    v = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    proj = d @ v
    p_part = -np.sum((w * d[:, j] * np.exp(1j * medium.kp * proj))[:, None] * d, axis=0)
    s_part = -np.sum((w * d_perp[:, j] * np.exp(1j * medium.ks * proj))[:, None] * d_perp, axis=0)
    return (p_part / (medium.lam + 2.0 * medium.mu) + s_part / medium.mu) / (8.0 * math.pi)


def mirror_term_reflected(x, z, j: int, medium: ElasticMedium, grid: DirectionGrid) -> np.ndarray:
    """The same quantity written over the downgoing grid with mirrored variables d', (d')^perp, x', z'"""
    d, w = grid.directions, grid.weights
    d_m, d_m_perp = mirror_dir(d)
    v_m = mirror_point(np.asarray(x, dtype=float)) - mirror_point(np.asarray(z, dtype=float))
    proj = d @ v_m
    p_part = np.sum((w * d_m[:, j] * np.exp(1j * medium.kp * proj))[:, None] * d_m, axis=0)
    s_part = np.sum((w * d_m_perp[:, j] * np.exp(1j * medium.ks * proj))[:, None] * d_m_perp, axis=0)
    return -(p_part / (medium.lam + 2.0 * medium.mu) + s_part / medium.mu) / (8.0 * math.pi)


def _check_shapes(dataset: NearFieldDataset, grid: DirectionGrid, line: Optional[MeasurementLine] = None):
    if dataset.u_p.shape[1] != grid.M + 1:
        raise ShapeMismatchError(f"dataset has {dataset.u_p.shape[1]} directions, grid has {grid.M + 1}")
    if line is not None and dataset.u_p.shape[0] != line.count:
        raise ShapeMismatchError(f"dataset has {dataset.u_p.shape[0]} nodes, line has {line.count}")
    if line is not None and line.to_dict() != dataset.line.to_dict():
        raise GeometryMismatchError(
            f"measurement line {line.to_dict()} differs from the dataset line {dataset.line.to_dict()}"
        )


def usc_superposition(x_index: int, z, j: int, dataset: NearFieldDataset,
                      grid: Optional[DirectionGrid] = None, mirror_weight: complex = 1.0) -> np.ndarray:
    """U^sc(x_i; z, e_j): data quadrature over S- plus the mirror term"""
    grid = grid or dataset.grid
    _check_shapes(dataset, grid)
    medium = dataset.medium
    d, w = grid.directions, grid.weights
    d_perp = grid.perp_directions
    z = np.asarray(z, dtype=float)

    phase_p = np.exp(-1j * medium.kp * (d @ z))
    phase_s = np.exp(-1j * medium.ks * (d @ z))
    p_part = np.sum((w * d[:, j] * phase_p)[:, None] * dataset.u_p[x_index], axis=0)
    s_part = np.sum((w * d_perp[:, j] * phase_s)[:, None] * dataset.u_s[x_index], axis=0)
    data = (p_part / (medium.lam + 2.0 * medium.mu) + s_part / medium.mu) / (8.0 * math.pi)

    x = dataset.line.nodes[x_index]
    return data + mirror_weight * mirror_term(x, z, j, medium, grid)


# ---------------------------------------------------------------------------
# Vectorized indicator
# ---------------------------------------------------------------------------

class _Synthesizer:
    """Matrices shared by all sampling points of one dataset"""

    def __init__(self, dataset: NearFieldDataset, line: MeasurementLine, mirror_weight: complex):
        medium = dataset.medium
        grid = dataset.grid
        self.kp, self.ks = medium.kp, medium.ks
        self.cp = 1.0 / (8.0 * math.pi * (medium.lam + 2.0 * medium.mu))
        self.cs = 1.0 / (8.0 * math.pi * medium.mu)
        self.d, self.w = grid.directions, grid.weights
        self.d_perp = grid.perp_directions
        self.up = grid.upper()
        self.up_perp = np.stack([-self.up[:, 1], self.up[:, 0]], axis=-1)
        self.line_weights = line.weights

        P, K = line.count, grid.M + 1
        x = line.nodes
        # (K, P*2) right factors; column block i holds the 2-vector at node i
        self.data_p = dataset.u_p.transpose(1, 0, 2).reshape(K, 2 * P)
        self.data_s = dataset.u_s.transpose(1, 0, 2).reshape(K, 2 * P)
        mirror_p = -np.exp(1j * self.kp * (self.up @ x.T))[:, :, None] * self.up[:, None, :]
        mirror_s = -np.exp(1j * self.ks * (self.up @ x.T))[:, :, None] * self.up_perp[:, None, :]
        self.mirror_p = mirror_weight * mirror_p.reshape(K, 2 * P)
        self.mirror_s = mirror_weight * mirror_s.reshape(K, 2 * P)
        self.P = P

    def fields(self, z: np.ndarray, j: int) -> np.ndarray:
        """U^sc(x_i; z, e_j) for z of shape (Z, 2), returned as (Z, P, 2)"""
        left_p = np.exp(-1j * self.kp * (z @ self.d.T)) * (self.w * self.d[:, j])
        left_s = np.exp(-1j * self.ks * (z @ self.d.T)) * (self.w * self.d_perp[:, j])
        left_mp = np.exp(-1j * self.kp * (z @ self.up.T)) * (self.w * self.up[:, j])
        left_ms = np.exp(-1j * self.ks * (z @ self.up.T)) * (self.w * self.up_perp[:, j])
        total = self.cp * (left_p @ self.data_p + left_mp @ self.mirror_p)
        total += self.cs * (left_s @ self.data_s + left_ms @ self.mirror_s)
        return total.reshape(z.shape[0], self.P, 2)

    def planes(self, z: np.ndarray) -> np.ndarray:
        """(2, Z) indicator contributions of e_1 and e_2"""
        out = np.empty((2, z.shape[0]))
        for j in (0, 1):
            u = self.fields(z, j)
            out[j] = np.einsum('zic,i->z', (u * u.conj()).real, self.line_weights)
        return out


def indicator(z, dataset: NearFieldDataset, line: Optional[MeasurementLine] = None,
              mode=PolarizationMode.BOTH, mirror_weight: complex = 1.0) -> float:
    """I(z) = sum_j sum_i w_i |U^sc(x_i; z, e_j)|^2 over the selected polarizations"""
    line = line or dataset.line
    _check_shapes(dataset, dataset.grid, line)
    line = dataset.line
    planes = _Synthesizer(dataset, line, mirror_weight).planes(np.asarray(z, dtype=float).reshape(1, 2))
    return float(sum(planes[j, 0] for j in PolarizationMode.parse(mode).indices))


def image_grid(grid: SamplingGrid, dataset: NearFieldDataset, line: Optional[MeasurementLine] = None,
               mode=PolarizationMode.BOTH, mirror_weight: complex = 1.0, threads: int = 0) -> ImagingResult:
    """
    Indicator at every sampling point

    Chunks of sampling points are evaluated in parallel and written back in a
    fixed order, so repeated runs give identical arrays.
    """
    line = line or dataset.line
    _check_shapes(dataset, dataset.grid, line)
    line = dataset.line
    if grid.z2_max >= line.a:
        logger.warning(f"Sampling rectangle reaches z2={grid.z2_max} at or above the measurement height {line.a}")

    synth = _Synthesizer(dataset, line, mirror_weight)
    z = grid.points.reshape(-1, 2)
    chunks = [slice(i, min(i + Z_CHUNK, z.shape[0])) for i in range(0, z.shape[0], Z_CHUNK)]
    with ThreadPoolExecutor(max_workers=threads or Config.worker_count()) as pool:
        parts = list(pool.map(lambda sl: synth.planes(z[sl]), chunks))
    planes = np.concatenate(parts, axis=1).reshape(2, grid.G1, grid.G2)

    metadata = {
        'surface': dataset.surface_id,
        'medium': dataset.medium.to_dict(),
        'line': line.to_dict(),
        'M': dataset.grid.M,
        'mirror_weight': [complex(mirror_weight).real, complex(mirror_weight).imag],
    }
    logger.info(f"Imaged {grid.G1}x{grid.G2} points from '{dataset.surface_id}' data")
    return ImagingResult(grid, planes, PolarizationMode.parse(mode), metadata)


def extract_surface(result: ImagingResult, profile: Optional[SurfaceProfile] = None,
                    window: float = METRIC_WINDOW) -> SurfaceEstimate:
    """Argmax curve, with mean and max |z2_hat - f(z1)| over |z1| <= window when a profile is given"""
    z1, z2_hat = result.argmax_curve()
    estimate = SurfaceEstimate(z1, z2_hat, window=window)
    if profile is not None:
        mask = np.abs(z1) <= window
        if np.any(mask):
            error = np.abs(z2_hat[mask] - np.asarray(profile.eval(z1[mask]), dtype=float))
            estimate.mean_error = float(np.mean(error))
            estimate.max_error = float(np.max(error))
            logger.info(f"Reconstruction error on |z1| <= {window}: mean {estimate.mean_error:.4f}, "
                        f"max {estimate.max_error:.4f}")
    return estimate


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_result(result: ImagingResult, path) -> Path:
    """CSV of (z1, z2, I, I_e1, I_e2) plus a JSON sidecar with grid and metadata"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = result.grid.points.reshape(-1, 2)
    frame = pd.DataFrame({
        'z1': points[:, 0],
        'z2': points[:, 1],
        'I': result.values.reshape(-1),
        'I_e1': result.planes[0].reshape(-1),
        'I_e2': result.planes[1].reshape(-1),
    })
    frame.to_csv(path, index=False, float_format='%.17g')

    sidecar = {'grid': result.grid.to_dict(), 'mode': result.mode.value, 'metadata': result.metadata}
    with open(path.with_suffix('.json'), 'w') as f:
        json.dump(sidecar, f, indent=2)
    logger.info(f"Imaging result saved: {path}")
    return path


def load_result(path) -> ImagingResult:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
        with open(path.with_suffix('.json')) as f:
            sidecar = json.load(f)
    except (OSError, ValueError) as e:
        raise DatasetFormatError(f"cannot read imaging result {path}: {e}") from e

    grid = SamplingGrid(**sidecar['grid'])
    shape = (grid.G1, grid.G2)
    planes = np.stack([frame['I_e1'].to_numpy().reshape(shape), frame['I_e2'].to_numpy().reshape(shape)])
    return ImagingResult(grid, planes, PolarizationMode.parse(sidecar['mode']), sidecar.get('metadata', {}))
