"""
Noise injection and dataset persistence

Dataset file layout (little-endian throughout):

    magic      8 bytes   b'ELSCNFD\\x00'
    version    uint32
    hlen       uint32    length of the JSON header in bytes
    header     hlen bytes, UTF-8 JSON (medium, line, M, surface, metadata, kinds)
    payload    float64 array: for kind in (P, S), node j, direction k, component c: Re, Im
    checksum   32 bytes  sha256 of everything before it
"""

import hashlib
import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from loguru import logger

from src.errors import DatasetChecksumError, DatasetFormatError, DatasetVersionError
from src.forward import NearFieldDataset
from src.medium_geom import DirectionGrid, ElasticMedium, MeasurementLine

MAGIC = b'ELSCNFD\x00'
FORMAT_VERSION = 1
GRANULARITIES = ('component', 'sample', 'dataset')
SCOPES = ('direction', 'global')


@dataclass(frozen=True)
class NoiseSpec:
    """
    Additive complex Gaussian noise delta (z1 + i z2) Mmax

    granularity: one draw per vector component ('component'), per sample
    shared by both components ('sample') or one draw for the whole dataset.
    scope: Mmax taken per (wave kind, incident direction) or over everything.
    """
    delta: float = 0.0
    seed: int = 0
    granularity: str = 'component'
    scope: str = 'direction'

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"noise ratio must be >= 0, got {self.delta}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}, got '{self.granularity}'")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got '{self.scope}'")


def _generator(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one chunk; chunks never share draws"""
    key = int(seed) & ((1 << 64) - 1)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, chunk, 0]))


def _draws(spec: NoiseSpec, chunk: int, shape) -> np.ndarray:
    rng = _generator(spec.seed, chunk)
    nodes, directions, _ = shape
    if spec.granularity == 'component':
        real = rng.standard_normal(shape)
        imag = rng.standard_normal(shape)
    elif spec.granularity == 'sample':
        real = np.repeat(rng.standard_normal((nodes, directions, 1)), 2, axis=-1)
        imag = np.repeat(rng.standard_normal((nodes, directions, 1)), 2, axis=-1)
    else:
        real = np.full(shape, rng.standard_normal())
        imag = np.full(shape, rng.standard_normal())
    return real + 1j * imag


def _peak(samples: np.ndarray, scope: str) -> np.ndarray:
    """Mmax broadcastable against (nodes, directions, 2)"""
    norms = np.linalg.norm(samples, axis=-1)
    if scope == 'direction':
        return norms.max(axis=0)[None, :, None]
    return np.full((1, 1, 1), norms.max())


def add_noise(dataset: NearFieldDataset, spec: NoiseSpec) -> NearFieldDataset:
    """Noisy copy of the dataset; P data use chunk 0 and S data chunk 1 of the seeded stream"""
    if spec.delta == 0:
        return replace(dataset, u_p=dataset.u_p.copy(), u_s=dataset.u_s.copy(), metadata=dict(dataset.metadata))

    noisy = {}
    for chunk, name in enumerate(('u_p', 'u_s')):
        samples = getattr(dataset, name)
        noise = _draws(spec, chunk, samples.shape)
        noisy[name] = samples + spec.delta * noise * _peak(samples, spec.scope)

    metadata = dict(dataset.metadata)
    metadata['noise'] = {'delta': spec.delta, 'seed': spec.seed,
                         'granularity': spec.granularity, 'scope': spec.scope}
    logger.info(f"Added {spec.delta:.0%} noise (seed {spec.seed}, {spec.granularity}/{spec.scope})")
    return replace(dataset, u_p=noisy['u_p'], u_s=noisy['u_s'], metadata=metadata)


# ---------------------------------------------------------------------------
# Binary format
# ---------------------------------------------------------------------------

def _payload(dataset: NearFieldDataset) -> bytes:
    stacked = np.stack([dataset.u_p, dataset.u_s])
    return np.ascontiguousarray(stacked).view(np.float64).astype('<f8').tobytes()


def save_dataset(dataset: NearFieldDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dataset.header()
    header['kinds'] = ['P', 'S']
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')

    body = MAGIC + struct.pack('<II', FORMAT_VERSION, len(header_bytes)) + header_bytes + _payload(dataset)
    with open(path, 'wb') as f:
        f.write(body + hashlib.sha256(body).digest())
    logger.info(f"Dataset saved: {path} ({len(body) + 32} bytes)")
    return path


def load_dataset(path) -> NearFieldDataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DatasetFormatError(f"cannot read dataset {path}: {e}") from e

    if not raw.startswith(MAGIC) and not MAGIC.startswith(raw):
        raise DatasetFormatError(f"{path} is not a near-field dataset")
    if len(raw) < len(MAGIC) + 8 + 32:
        raise DatasetChecksumError(f"{path} is truncated ({len(raw)} bytes)")
    version, header_length = struct.unpack('<II', raw[len(MAGIC):len(MAGIC) + 8])
    if version != FORMAT_VERSION:
        raise DatasetVersionError(version, FORMAT_VERSION)

    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise DatasetChecksumError(f"checksum mismatch in {path} (truncated or corrupted)")

    start = len(MAGIC) + 8
    try:
        header = json.loads(body[start:start + header_length].decode('utf-8'))
        medium = ElasticMedium(header['medium']['lambda'], header['medium']['mu'], header['medium']['omega'])
        line = MeasurementLine(header['line']['a'], header['line']['A'], header['line']['N'])
        grid = DirectionGrid(header['M'])
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"unreadable dataset header in {path}: {e}") from e

    values = np.frombuffer(body[start + header_length:], dtype='<f8')
    expected = 2 * line.count * (grid.M + 1) * 2 * 2
    if values.size != expected:
        raise DatasetChecksumError(f"payload holds {values.size} values, expected {expected}")
    samples = values.astype(np.float64).view(np.complex128).reshape(2, line.count, grid.M + 1, 2)

    return NearFieldDataset(medium, line, grid, samples[0].copy(), samples[1].copy(),
                            header.get('surface', ''), header.get('metadata', {}))


def export_csv(dataset: NearFieldDataset, path) -> Path:
    """One row per (wave kind, direction k, node j)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = dataset.line.nodes
    count, directions = dataset.line.count, dataset.grid.M + 1
    k_index, j_index = np.meshgrid(np.arange(directions), np.arange(count), indexing='ij')
    frames = []
    for kind in ('P', 'S'):
        u = dataset.samples(kind).transpose(1, 0, 2)
        frames.append(pd.DataFrame({
            'wave_kind': kind,
            'k': k_index.reshape(-1),
            'j': j_index.reshape(-1),
            'x1': nodes[j_index.reshape(-1), 0],
            'x2': nodes[j_index.reshape(-1), 1],
            'Re u1': u[..., 0].real.reshape(-1),
            'Im u1': u[..., 0].imag.reshape(-1),
            'Re u2': u[..., 1].real.reshape(-1),
            'Im u2': u[..., 1].imag.reshape(-1),
        }))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Dataset exported as CSV: {path}")
    return path


def describe(dataset: NearFieldDataset, noise: Optional[NoiseSpec] = None) -> str:
    kinds = f"{dataset.line.count} nodes x {dataset.grid.M + 1} directions x 2 kinds"
    suffix = f", noise {noise.delta:.0%}" if noise and noise.delta else ''
    return f"{dataset.surface_id or 'dataset'}: {kinds}{suffix}"
