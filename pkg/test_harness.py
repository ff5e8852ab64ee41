#!/usr/bin/env python3
"""
Tests for experiment configuration, validation suites, rendering and the command line
"""

import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from config.config import Config
from harness import experiment
from harness import experiment_runner as runner_module
from harness.experiment import ExperimentConfig, PRESETS
from harness.experiment_runner import EXIT_CONFIG, EXIT_IO, EXIT_OK, ExperimentRunner, main, parse_axes
from harness.render import ARGMAX_CURVE, TRUE_CURVE, heatmap_array, render_heatmap
from harness.validation import run_validation
from src.errors import ConfigError, GeometryMismatchError
from src.imaging import ImagingResult, SamplingGrid
from src.medium_geom import flat_surface

TINY = """
# [surface]
surface.id=flat
# [medium]
medium.omega=5.0
# [measurement]
measurement.a=1.0
measurement.A=2.0
measurement.N=10
# [directions]
directions.M=4
# [sampling]
sampling.z1_min=-1.0
sampling.z1_max=1.0
sampling.z2_max=0.5
sampling.G1=5
sampling.G2=4
# [output]
output.heatmap=true
"""


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Keep logs and default directories inside the test's temporary directory"""
    monkeypatch.setattr(Config, 'LOG_FILE', str(tmp_path / 'logs' / 'elastoscan.log'))
    monkeypatch.setattr(Config, 'OUTPUT_DIR', str(tmp_path / 'results'))
    monkeypatch.setattr(Config, 'DATASET_DIR', str(tmp_path / 'datasets'))
    monkeypatch.setattr(Config, 'THREADS', 2)


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / 'tiny.cfg'
    path.write_text(TINY)
    return path


class TestConfig:

    @settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(
        omega=st.floats(min_value=0.1, max_value=100.0, allow_nan=False),
        N=st.integers(min_value=1, max_value=500),
        delta=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        mode=st.sampled_from(['E1', 'E2', 'Both']),
        half_width=st.one_of(st.none(), st.floats(min_value=1.0, max_value=50.0, allow_nan=False)),
        heatmap=st.booleans(),
        surface_id=st.sampled_from(['f1', 'f2', 'f3', 'f4', 'flat']),
    )
    def test_serialize_parses_back(self, omega, N, delta, mode, half_width, heatmap, surface_id):
        base = ExperimentConfig()
        config = replace(
            base,
            surface=replace(base.surface, id=surface_id),
            medium=replace(base.medium, omega=omega),
            measurement=replace(base.measurement, N=N),
            noise=replace(base.noise, delta=delta),
            imaging=replace(base.imaging, mode=mode),
            solver=replace(base.solver, half_width=half_width),
            output=replace(base.output, heatmap=heatmap),
        )
        assert experiment.parse(experiment.serialize(config)) == config

    def test_custom_surface_round_trip(self, tmp_path):
        spec = flat_surface(0.2).describe()
        config = experiment.from_mapping({'surface.id': 'mine', 'surface.expr': '0.3 - 0.1*cos(2*x+0.5)',
                                          'surface.split': '1.5', 'surface.expr_right': spec['expr']})
        path = experiment.save(config, tmp_path / 'custom.cfg')
        loaded = experiment.load(path)
        assert loaded == config
        profile = loaded.surface_profile()
        assert profile.eval(2.0) == pytest.approx(0.2)
        assert loaded.problems() == []

    def test_complex_mirror_weight(self, tmp_path):
        config = experiment.parse("imaging.mirror_weight=0.7-1.3j\n")
        assert config.imaging.mirror_weight == 0.7 - 1.3j
        assert 'imaging.mirror_weight=0.7-1.3j' in experiment.serialize(config)
        assert experiment.load(experiment.save(config, tmp_path / 'w.cfg')) == config
        assert experiment.parse("imaging.mirror_weight=2.5\n").imaging.mirror_weight == 2.5
        with pytest.raises(ConfigError):
            experiment.parse("imaging.mirror_weight=1+j2\n")

    def test_defaults_are_valid(self):
        assert ExperimentConfig().validate().surface.id == 'f2'

    def test_problems_are_collected(self):
        config = experiment.from_mapping({
            'measurement.a': '0.5',
            'directions.M': '255',
            'noise.granularity': 'pixel',
            'imaging.mode': 'E3',
        })
        found = config.problems()
        assert len(found) == 4
        assert any('sup f' in p for p in found)
        with pytest.raises(ConfigError) as info:
            config.validate()
        assert info.value.problems == found

    def test_unknown_surface_reported(self):
        found = experiment.from_mapping({'surface.id': 'f9'}).problems()
        assert any("unknown surface id 'f9'" in p for p in found)

    def test_unknown_key_and_bad_value(self):
        with pytest.raises(ConfigError) as info:
            experiment.parse("medium.omega=abc\nmedium.rho=2\nsolver=3\n")
        problems = info.value.problems
        assert len(problems) == 3
        assert any("medium.rho" in p for p in problems)
        with pytest.raises(ConfigError):
            experiment.load('/nonexistent/experiment.cfg')

    def test_forward_key_ignores_imaging_settings(self):
        base = ExperimentConfig()
        noisy = experiment.from_mapping({'noise.delta': '0.4', 'imaging.mode': 'E1'})
        assert noisy.forward_key() == base.forward_key()
        assert experiment.from_mapping({'medium.omega': '25'}).forward_key() != base.forward_key()

    def test_presets(self):
        expected = {f'fig{n}-{s}' for n in range(3, 8) for s in 'abc'} | {'flat'}
        assert set(PRESETS) == expected
        assert experiment.preset('fig4-a').measurement.a == 1.1
        assert experiment.preset('fig3-c').medium.omega == 25.0
        assert experiment.preset('fig6-c').noise.delta == 0.4
        assert experiment.preset('fig7-b').imaging.mode == 'E2'
        assert experiment.preset('flat').output.check_oracle
        assert experiment.preset('fig5-b').output.directory == './results/fig5-b'
        for name in PRESETS:
            assert experiment.preset(name).problems() == []
        with pytest.raises(ConfigError):
            experiment.preset('fig9-a')


class TestValidation:

    def test_quick_suites_pass(self):
        results = run_validation(quick=True)
        names = [r.name for r in results]
        assert 'im_green_routes' in names and 'flat_forward' not in names
        failed = [(r.name, r.measured) for r in results if not r.passed]
        assert failed == []
        routes = next(r for r in results if r.name == 'im_green_routes')
        assert routes.details['f2_outcome'] == 'printed F2 corrected'
        invariants = next(r for r in results if r.name == 'exact_invariants')
        assert invariants.measured == 0 and invariants.details['failed'] == []

    def test_report_lists_experiment_tolerances(self, tmp_path):
        with ExperimentRunner(out_dir=str(tmp_path / 'validate')) as runner:
            report = runner.cmd_validate(quick=True)
        checks = {c['name']: c['tolerance'] for c in report['experiment_checks']}
        assert checks == {'reconstruction_mean_error': 0.0785, 'noise_robustness_ratio': 2.0,
                          'polarization_cells': 1.0}
        saved = json.loads((tmp_path / 'validate' / 'validate_report.json').read_text())
        assert {s['name'] for s in saved['suites']} >= {'funk_hecke', 'exact_invariants'}
        assert len(saved['experiment_checks']) == 3

    def test_perturbed_closed_form_fails(self):
        results = run_validation(quick=True, f1_perturbation=1e-3)
        routes = next(r for r in results if r.name == 'im_green_routes')
        assert not routes.passed
        assert all(r.passed for r in results if r.name != 'im_green_routes')


class TestRender:

    def result(self, planes):
        return ImagingResult(SamplingGrid(-1.0, 1.0, 0.0, 1.0, 6, 5), planes)

    def test_constant_indicator_gives_uniform_image(self):
        image = heatmap_array(self.result(np.full((2, 6, 5), 0.5)), show_argmax=False)
        assert image.shape == (5, 6, 3)
        assert np.all(image == image[0, 0])

    def test_overlays(self):
        planes = np.zeros((2, 6, 5))
        planes[:, :, 4] = 1.0
        image = heatmap_array(self.result(planes), profile=flat_surface(0.0))
        # argmax is the top row, the flat profile the bottom one
        assert np.all(image[0] == ARGMAX_CURVE)
        assert np.all(image[-1] == TRUE_CURVE)

    def test_render_is_deterministic(self, tmp_path, rng):
        result = self.result(rng.uniform(size=(2, 6, 5)))
        first = render_heatmap(result, tmp_path / 'a.ppm', scale=2)
        second = render_heatmap(result, tmp_path / 'b.ppm', scale=2)
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes().startswith(b'P6')
        with pytest.raises(ValueError):
            render_heatmap(result, tmp_path / 'c.ppm', palette='rainbow')


class TestCommandLine:

    def test_parse_axes(self):
        assert parse_axes(['noise.delta=0, 0.2,0.4', 'medium.omega=15']) == {
            'noise.delta': ['0', '0.2', '0.4'], 'medium.omega': ['15'],
        }
        assert parse_axes(None) == {}
        with pytest.raises(ConfigError):
            parse_axes(['noise.delta'])

    def test_bad_config_exits_with_config_code(self, tmp_path):
        bad = tmp_path / 'bad.cfg'
        bad.write_text("measurement.a=0.1\n")
        assert main(['image', '--config', str(bad), '--out', str(tmp_path / 'out')]) == EXIT_CONFIG
        assert main(['forward', '--preset', 'nope', '--out', str(tmp_path / 'out')]) == EXIT_CONFIG

    def test_missing_dataset_exits_with_io_code(self, tiny_file, tmp_path):
        assert main(['image', '--config', str(tiny_file), '--out', str(tmp_path / 'empty')]) == EXIT_IO
        assert main(['render', '--config', str(tiny_file), '--out', str(tmp_path / 'empty')]) == EXIT_IO

    def test_forward_image_render(self, tiny_file, tmp_path):
        out = tmp_path / 'run'
        args = ['--config', str(tiny_file), '--out', str(out), '--threads', '2']
        assert main(['forward'] + args) == EXIT_OK
        assert (out / 'dataset.nfd').is_file()
        assert main(['image'] + args) == EXIT_OK
        metrics = json.loads((out / 'metrics.json').read_text())
        assert metrics['mode'] == 'Both'
        assert metrics['peak'] > 0
        curve = pd.read_csv(out / 'curve.csv')
        assert len(curve) == 5
        assert (out / 'heatmap.ppm').is_file()
        heatmap = (out / 'heatmap.ppm').read_bytes()
        assert main(['render'] + args) == EXIT_OK
        assert (out / 'heatmap.ppm').read_bytes() == heatmap

        # same dataset, different geometry in the config
        other = tmp_path / 'other.cfg'
        other.write_text(TINY.replace('medium.omega=5.0', 'medium.omega=6.0'))
        code = main(['image', '--config', str(other), '--out', str(out)])
        assert code == EXIT_CONFIG

    def test_image_leaves_dataset_untouched(self, tiny_file, tmp_path):
        config = experiment.load(tiny_file)
        noisy = replace(config, noise=replace(config.noise, delta=0.3))
        with ExperimentRunner(config, str(tmp_path / 'run')) as runner:
            runner.cmd_forward(progress=False)
            before = runner.dataset_path.read_bytes()
        with ExperimentRunner(noisy, str(tmp_path / 'run')) as runner:
            runner.cmd_image()
            assert runner.dataset_path.read_bytes() == before
            with pytest.raises(GeometryMismatchError):
                runner.config = replace(noisy, directions=replace(noisy.directions, M=8))
                runner.cmd_image()

    def test_sweep_shares_datasets(self, tiny_file, tmp_path):
        config = experiment.load(tiny_file)
        with ExperimentRunner(config, str(tmp_path / 'sweep')) as runner:
            table = runner.cmd_sweep({'noise.delta': ['0', '0.2'], 'imaging.mode': ['E1', 'Both']})
        assert len(table) == 4
        assert set(table.columns) >= {'noise.delta', 'imaging.mode', 'mean_error', 'peak'}
        assert (tmp_path / 'sweep' / 'sweep.csv').is_file()
        # same data and noise: Both >= E1
        clean = table[table['noise.delta'] == '0'].set_index('imaging.mode')
        assert clean.loc['Both', 'peak'] >= clean.loc['E1', 'peak']


    def test_sweep_reuses_only_a_matching_dataset(self, tiny_file, tmp_path, monkeypatch):
        config = experiment.load(tiny_file)
        out = str(tmp_path / 'sweep')
        with ExperimentRunner(config, out) as runner:
            runner.cmd_forward(progress=False)

        calls = []
        real = runner_module.generate_dataset

        def counting(*args, **kwargs):
            calls.append(args[0].id)
            return real(*args, **kwargs)

        monkeypatch.setattr(runner_module, 'generate_dataset', counting)
        with ExperimentRunner(config, out) as runner:
            runner.cmd_sweep({'noise.delta': ['0', '0.2']})
        assert calls == []

        finer = replace(config, solver=replace(config.solver, nodes_per_wavelength=14.0))
        with ExperimentRunner(finer, out) as runner:
            runner.cmd_sweep({'noise.delta': ['0']})
        assert calls == ['flat']

    def test_surface_description_is_checked(self, tiny_file, tmp_path):
        config = experiment.load(tiny_file)
        raised = experiment.from_mapping({'surface.expr': '0.1'}, config)
        with ExperimentRunner(config, str(tmp_path / 'run')) as runner:
            runner.cmd_forward(progress=False)
            dataset = runner._load_matching(None, strict=True)
            assert runner._provenance_mismatches(dataset, config) == []
            found = runner._provenance_mismatches(dataset, raised)
        assert any(p.startswith('surface') for p in found)

@pytest.mark.slow
class TestAcceptance:

    def test_full_validation(self, tmp_path):
        assert main(['validate', '--out', str(tmp_path / 'validate')]) == EXIT_OK
        report = json.loads((tmp_path / 'validate' / 'validate_report.json').read_text())
        assert report['passed']

    def test_flat_preset_matches_oracle(self, tmp_path):
        out = tmp_path / 'flat'
        assert main(['forward', '--preset', 'flat', '--out', str(out)]) == EXIT_OK
        report = json.loads((out / 'forward_report.json').read_text())
        assert report['oracle_passed']
        assert main(['image', '--preset', 'flat', '--out', str(out)]) == EXIT_OK
        metrics = json.loads((out / 'metrics.json').read_text())
        assert metrics['mean_error'] < 0.1

    def test_reconstruction_of_f2(self, tmp_path):
        config = experiment.from_mapping({'noise.delta': '0'}, experiment.preset('fig4-b'))
        with ExperimentRunner(config, str(tmp_path / 'fig4')) as runner:
            runner.cmd_forward(progress=False)
            metrics = runner.cmd_image()
        # a quarter of the shear wavelength at ks = 20
        assert metrics['mean_error'] <= 0.0785

    def test_noise_robustness_on_f4(self, tmp_path):
        with ExperimentRunner(experiment.preset('fig6-a'), str(tmp_path / 'fig6')) as runner:
            table = runner.cmd_sweep({'noise.delta': ['0', '0.4']}).set_index('noise.delta')
        clean, noisy = table.loc['0', 'mean_error'], table.loc['0.4', 'mean_error']
        assert noisy <= 2.0 * clean
        assert noisy <= 0.157

    def test_both_polarizations_combine(self, tmp_path):
        with ExperimentRunner(experiment.preset('fig7-c'), str(tmp_path / 'fig7')) as runner:
            table = runner.cmd_sweep({'imaging.mode': ['E1', 'E2', 'Both']}).set_index('imaging.mode')
        cell = 1.2 / 60
        best_single = min(table.loc['E1', 'mean_error'], table.loc['E2', 'mean_error'])
        assert table.loc['Both', 'mean_error'] <= best_single + cell
