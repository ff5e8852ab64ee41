"""
Experiment runner and command-line front end
Drives the four steps: sampling mesh, near-field data, indicator, plot
"""

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

# Add the project root to the Python path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd
from colorama import Fore, Style, init as colorama_init
from loguru import logger
from tqdm import tqdm

from config.config import Config, ensure_directories
from harness import experiment
from harness.experiment import ExperimentConfig
from harness.render import render_heatmap
from harness.validation import experiment_checks, run_validation
from src.errors import ConfigError, DatasetFormatError, ElastoScanError, GeometryMismatchError
from src.forward import NearFieldDataset, default_boundary, generate_dataset, oracle_dataset
from src.imaging import extract_surface, image_grid, load_result, save_result
from src.synthkit import add_noise, describe, export_csv, load_dataset, save_dataset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

ORACLE_TOLERANCE = 2e-2
ORACLE_MAX_ANGLE = 60.0


class ExperimentRunner:
    """
    Orchestrates one experiment configuration:
    1. Validate the configuration
    2. Generate (or load) the near-field dataset
    3. Compute the indicator on the sampling grid
    4. Render and report
    """

    def __init__(self, config: Optional[ExperimentConfig] = None, out_dir: Optional[str] = None,
                 threads: int = 0, seed: Optional[int] = None):
        self.logger = logger
        self.config = config or ExperimentConfig()
        if seed is not None:
            self.config = replace(self.config, noise=replace(self.config.noise, seed=int(seed)))
        self.out_dir = Path(out_dir or self.config.output.directory)
        self.threads = threads or Config.worker_count()
        self._sink = None

        if not Config.validate_config():
            raise ConfigError(["invalid runtime settings, check your .env file"])

    def initialize(self) -> 'ExperimentRunner':
        """Create output directories and attach the log file"""
        ensure_directories([str(self.out_dir)])
        if self._sink is None:
            self._sink = self.logger.add(Config.LOG_FILE, rotation="10 MB", level=Config.LOG_LEVEL)
        self.logger.info(f"Experiment runner ready (output: {self.out_dir}, threads: {self.threads})")
        return self

    @property
    def dataset_path(self) -> Path:
        return self.out_dir / 'dataset.nfd'

    @property
    def result_path(self) -> Path:
        return self.out_dir / 'result.csv'

    def _write_json(self, name: str, payload: Dict) -> Path:
        path = self.out_dir / name
        with open(path, 'w') as f:
            json.dump(payload, f, indent=2, default=str)
        self.logger.info(f"Report saved: {path}")
        return path

    # -- commands -------------------------------------------------------------

    def cmd_validate(self, quick: bool = False) -> Dict:
        """Run the identity suites; the report lists every measured error and tolerance"""
        self.logger.info("Running validation suites...")
        results = run_validation(self.config.elastic_medium(), quick=quick)
        report = {
            'passed': all(r.passed for r in results),
            'suites': [r.to_dict() for r in results],
            'experiment_checks': experiment_checks(),
        }
        self._write_json('validate_report.json', report)
        return report

    def cmd_forward(self, progress: bool = True) -> Dict:
        """Generate and save the dataset; flat configurations can be checked against the oracle"""
        config = self.config.validate()
        surface = config.surface_profile()
        medium = config.elastic_medium()
        line, grid = config.measurement_line(), config.direction_grid()

        started = time.perf_counter()
        dataset = generate_dataset(surface, medium, line, grid, config.solver_params(self.threads), progress)
        save_dataset(dataset, self.dataset_path)
        report = {'dataset': str(self.dataset_path), 'seconds': time.perf_counter() - started,
                  'assembly_hash': dataset.metadata.get('assembly_hash')}
        if config.output.export_csv:
            report['csv'] = str(export_csv(dataset, self.out_dir / 'dataset.csv'))

        if config.output.check_oracle:
            height = float(surface.eval(0.0))
            error = oracle_error(dataset, oracle_dataset(medium, line, grid, height))
            report['oracle_error'] = error
            report['oracle_passed'] = error <= ORACLE_TOLERANCE
            level = 'info' if report['oracle_passed'] else 'error'
            getattr(self.logger, level)(f"Flat-oracle check: {error:.3e} (tolerance {ORACLE_TOLERANCE:.0e})")
        self._write_json('forward_report.json', report)
        return report

    def _provenance_mismatches(self, dataset: NearFieldDataset, config: ExperimentConfig) -> List[str]:
        """Surface description and solver settings recorded at generation time against the config"""
        meta = dataset.metadata
        try:
            surface = config.surface_profile()
        except ElastoScanError as e:
            return [f"surface: {e}"]
        found = []
        if meta.get('surface_spec') != surface.describe():
            found.append(f"surface {meta.get('surface_spec')} != {surface.describe()}")

        medium = config.elastic_medium()
        params = config.solver_params(self.threads)
        expected = default_boundary(surface, medium, config.measurement.A, params).to_dict()
        recorded = meta.get('boundary') or {}
        if set(recorded) != set(expected) or not np.allclose(
                [recorded[k] for k in expected], list(expected.values()), rtol=1e-12, atol=0.0):
            found.append(f"solver boundary {recorded} != {expected}")
        eta = params.coupling(medium)
        if not np.allclose(meta.get('eta', [np.nan, np.nan]), [eta.real, eta.imag], rtol=1e-12, atol=0.0):
            found.append(f"eta {meta.get('eta')} != {[eta.real, eta.imag]}")
        return found

    def _load_matching(self, dataset_path: Optional[str], strict: bool = False) -> NearFieldDataset:
        """
        Load a dataset and check it against the configuration

        Medium, line and M must always agree. With strict=True the recorded
        surface and solver settings must agree too; otherwise they only warn.
        """
        dataset = load_dataset(dataset_path or self.dataset_path)
        config = self.config
        mismatches = []
        if dataset.medium != config.elastic_medium():
            mismatches.append(f"medium {dataset.medium.to_dict()} != {config.elastic_medium().to_dict()}")
        if dataset.line != config.measurement_line():
            mismatches.append(f"line {dataset.line.to_dict()} != {config.measurement_line().to_dict()}")
        if dataset.grid.M != config.directions.M:
            mismatches.append(f"M {dataset.grid.M} != {config.directions.M}")
        if strict:
            mismatches.extend(self._provenance_mismatches(dataset, config))
        if mismatches:
            raise GeometryMismatchError('dataset does not match the configuration: ' + '; '.join(mismatches))
        if not strict:
            for problem in self._provenance_mismatches(dataset, config):
                self.logger.warning(f"Dataset provenance: {problem}")
        return dataset

    def _image(self, config: ExperimentConfig, dataset: NearFieldDataset, out_dir: Optional[Path] = None,
               threads: Optional[int] = None) -> Dict:
        started = time.perf_counter()
        noisy = add_noise(dataset, config.noise_spec())
        self.logger.info(f"Imaging {describe(noisy, config.noise_spec())}")
        result = image_grid(config.sampling_grid(), noisy, mode=config.polarization(),
                            mirror_weight=config.imaging.mirror_weight, threads=threads or self.threads)
        profile = None
        try:
            profile = config.surface_profile()
        except ElastoScanError:
            pass
        estimate = extract_surface(result, profile, config.imaging.window)
        metrics = {
            'mean_error': estimate.mean_error,
            'max_error': estimate.max_error,
            'peak': float(result.values.max()),
            'seconds': time.perf_counter() - started,
        }
        if out_dir is not None:
            save_result(result, out_dir / 'result.csv')
            pd.DataFrame({'z1': estimate.z1, 'z2_hat': estimate.z2}).to_csv(out_dir / 'curve.csv', index=False)
            if config.output.heatmap:
                render_heatmap(result, out_dir / 'heatmap.ppm', profile)
        return metrics

    def cmd_image(self, dataset_path: Optional[str] = None) -> Dict:
        """Indicator grid, argmax curve and error metrics; the dataset file is only read"""
        config = self.config.validate()
        dataset = self._load_matching(dataset_path)
        metrics = self._image(config, dataset, self.out_dir)
        metrics['mode'] = config.polarization().value
        self._write_json('metrics.json', metrics)
        return metrics

    def cmd_sweep(self, axes: Optional[Dict[str, Sequence[str]]] = None) -> pd.DataFrame:
        """
        One metrics row per point of the cartesian product of the axes

        Datasets are generated once per distinct forward configuration and
        shared by every imaging job that needs them.
        """
        axes = axes or {}
        names = list(axes)
        combos = [dict(zip(names, values)) for values in itertools.product(*(axes[n] for n in names))]
        configs = [experiment.from_mapping(c, self.config).validate() for c in combos]

        datasets: Dict[str, NearFieldDataset] = {}
        for config in configs:
            key = config.forward_key()
            if key in datasets:
                continue
            if config.forward_key() == self.config.forward_key() and self.dataset_path.is_file():
                try:
                    datasets[key] = self._load_matching(None, strict=True)
                    continue
                except GeometryMismatchError as e:
                    self.logger.warning(f"Stored dataset not reused: {e}")
            datasets[key] = generate_dataset(config.surface_profile(), config.elastic_medium(),
                                             config.measurement_line(), config.direction_grid(),
                                             config.solver_params(self.threads))
        self.logger.info(f"Sweep: {len(configs)} jobs over {len(datasets)} datasets")

        workers = max(1, min(len(configs), self.threads))
        inner = max(1, self.threads // workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = pool.map(lambda c: self._image(c, datasets[c.forward_key()], threads=inner), configs)
            rows = list(tqdm(jobs, total=len(configs), desc='sweep', unit='job'))

        table = pd.DataFrame([{**combo, **row} for combo, row in zip(combos, rows)])
        table.to_csv(self.out_dir / 'sweep.csv', index=False)
        self.logger.info(f"Sweep table saved: {self.out_dir / 'sweep.csv'}")
        return table

    def cmd_render(self, result_path: Optional[str] = None) -> Path:
        path = Path(result_path or self.result_path)
        if not path.is_file():
            raise DatasetFormatError(f"imaging result not found: {path}")
        result = load_result(path)
        profile = None
        try:
            profile = self.config.surface_profile()
        except ElastoScanError:
            self.logger.warning("Surface profile unavailable, rendering without the true curve")
        return render_heatmap(result, path.with_name('heatmap.ppm'), profile)

    def cleanup(self):
        """Detach the log file sink"""
        try:
            if self._sink is not None:
                self.logger.remove(self._sink)
                self._sink = None
        except ValueError as e:
            self.logger.error(f"Cleanup error: {str(e)}")

    def __enter__(self):
        return self.initialize()

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.cleanup()


def oracle_error(dataset: NearFieldDataset, oracle: NearFieldDataset,
                 max_angle: float = ORACLE_MAX_ANGLE) -> float:
    """Worst relative L2 error over the central half of the line and directions within max_angle of vertical"""
    nodes = dataset.line.nodes
    central = np.abs(nodes[:, 0]) <= 0.5 * dataset.line.A
    d = dataset.grid.directions
    steep = np.degrees(np.arccos(np.clip(-d[:, 1], -1.0, 1.0))) <= max_angle
    worst = 0.0
    for kind in ('P', 'S'):
        got = dataset.samples(kind)[central][:, steep]
        want = oracle.samples(kind)[central][:, steep]
        error = np.linalg.norm(got - want, axis=(0, 2)) / np.linalg.norm(want, axis=(0, 2))
        worst = max(worst, float(error.max()))
    return worst


# Convenience functions for quick usage
def run_forward(config: ExperimentConfig, out_dir: Optional[str] = None) -> Dict:
    with ExperimentRunner(config, out_dir) as runner:
        return runner.cmd_forward()


def run_image(config: ExperimentConfig, dataset_path: Optional[str] = None, out_dir: Optional[str] = None) -> Dict:
    with ExperimentRunner(config, out_dir) as runner:
        return runner.cmd_image(dataset_path)


def run_sweep(config: ExperimentConfig, axes: Dict[str, Sequence[str]], out_dir: Optional[str] = None) -> pd.DataFrame:
    with ExperimentRunner(config, out_dir) as runner:
        return runner.cmd_sweep(axes)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def parse_axes(specs: Optional[List[str]]) -> Dict[str, List[str]]:
    """['noise.delta=0,0.2,0.4', ...] -> {'noise.delta': ['0', '0.2', '0.4']}"""
    axes = {}
    for spec in specs or []:
        key, sep, values = spec.partition('=')
        if not sep or not values:
            raise ConfigError([f"sweep axis '{spec}' must look like section.key=v1,v2,..."])
        axes[key.strip()] = [v.strip() for v in values.split(',') if v.strip()]
    return axes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment file (section.key=value lines)')
    common.add_argument('--preset', help='named preset, e.g. fig4-b or flat')
    common.add_argument('--out', help='output directory')
    common.add_argument('--seed', type=int, help='noise seed (unsigned 64-bit)')
    common.add_argument('--threads', type=int, default=0, help='worker threads (0 = all cores)')

    parser = argparse.ArgumentParser(prog='elastoscan', description='Elastic rough-surface imaging toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    validate = sub.add_parser('validate', parents=[common], help='run the identity suites')
    validate.add_argument('--quick', action='store_true', help='skip the solver-based suites')
    sub.add_parser('forward', parents=[common], help='generate the near-field dataset')
    image = sub.add_parser('image', parents=[common], help='compute the indicator from a dataset')
    image.add_argument('--dataset', help='dataset file (default: <out>/dataset.nfd)')
    sweep = sub.add_parser('sweep', parents=[common], help='run a parameter sweep')
    sweep.add_argument('--axis', action='append', help='section.key=v1,v2,... (repeatable)')
    render = sub.add_parser('render', parents=[common], help='render a heatmap of an imaging result')
    render.add_argument('--result', help='result CSV (default: <out>/result.csv)')
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    base = experiment.preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        return experiment.load(args.config, base)
    return base


def _status(ok: bool, message: str):
    colour = Fore.GREEN if ok else Fore.RED
    print(f"{colour}{'PASS' if ok else 'FAIL'}{Style.RESET_ALL} {message}")


def main(argv: Optional[List[str]] = None) -> int:
    colorama_init()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        with ExperimentRunner(config, args.out, args.threads, args.seed) as runner:
            if args.command == 'validate':
                report = runner.cmd_validate(quick=args.quick)
                for suite in report['suites']:
                    _status(suite['passed'], f"{suite['name']}: {suite['measured']:.3e} <= {suite['tolerance']:.0e}")
                return EXIT_OK if report['passed'] else EXIT_VALIDATION

            if args.command == 'forward':
                report = runner.cmd_forward()
                print(f"{Fore.GREEN}dataset{Style.RESET_ALL} {report['dataset']}")
                if 'oracle_passed' in report:
                    _status(report['oracle_passed'], f"flat oracle: {report['oracle_error']:.3e}")
                    return EXIT_OK if report['oracle_passed'] else EXIT_VALIDATION
                return EXIT_OK

            if args.command == 'image':
                metrics = runner.cmd_image(args.dataset)
                if metrics['mean_error'] is not None:
                    print(f"mean error {metrics['mean_error']:.4f}, max error {metrics['max_error']:.4f}")
                return EXIT_OK

            if args.command == 'sweep':
                table = runner.cmd_sweep(parse_axes(args.axis))
                print(table.to_string(index=False))
                return EXIT_OK

            if args.command == 'render':
                print(f"{Fore.GREEN}heatmap{Style.RESET_ALL} {runner.cmd_render(args.result)}")
                return EXIT_OK

    except (ConfigError, GeometryMismatchError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"{Fore.RED}config error{Style.RESET_ALL} {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetFormatError, OSError) as e:
        logger.error(f"I/O error: {e}")
        print(f"{Fore.RED}I/O error{Style.RESET_ALL} {e}", file=sys.stderr)
        return EXIT_IO
    except ElastoScanError as e:
        logger.error(f"Run failed: {e}")
        print(f"{Fore.YELLOW}failed{Style.RESET_ALL} {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
