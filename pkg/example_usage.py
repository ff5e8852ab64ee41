"""
Example Usage Script for the ElastoScan toolkit
Demonstrates the library calls behind the command line
"""

from dataclasses import replace

from harness import experiment
from harness.experiment_runner import run_forward, run_image, run_sweep
from harness.render import render_heatmap
from src.forward import SolverParams, generate_dataset
from src.imaging import SamplingGrid, extract_surface, image_grid
from src.medium_geom import DirectionGrid, ElasticMedium, MeasurementLine, surface_registry
from src.synthkit import NoiseSpec, add_noise


def example_library_pipeline():
    """Example: dataset, noise, indicator and heatmap without the runner"""
    print("=== Example 1: Library pipeline ===")

    surface = surface_registry('f2')
    medium = ElasticMedium(lam=1.0, mu=1.0, omega=10.0)
    line = MeasurementLine(a=2.0, A=4.0, N=60)
    grid = DirectionGrid(64)

    dataset = generate_dataset(surface, medium, line, grid, SolverParams(nodes_per_wavelength=10), progress=True)
    noisy = add_noise(dataset, NoiseSpec(delta=0.2, seed=7))

    result = image_grid(SamplingGrid(-3.0, 3.0, 0.0, 1.2, 121, 49), noisy)
    estimate = extract_surface(result, surface, window=2.0)
    print(f"Mean reconstruction error: {estimate.mean_error:.4f}")
    render_heatmap(result, './results/example/heatmap.ppm', surface)


def example_preset_run():
    """Example: a named preset through the runner"""
    print("\n=== Example 2: Preset run ===")

    config = experiment.preset('fig4-b')
    report = run_forward(config)
    print(f"Dataset written to {report['dataset']}")
    metrics = run_image(config)
    print(f"Metrics: {metrics}")


def example_sweep():
    """Example: noise sweep sharing one dataset"""
    print("\n=== Example 3: Noise sweep ===")

    config = experiment.preset('fig6-a')
    config = replace(config, output=replace(config.output, heatmap=False))
    table = run_sweep(config, {'noise.delta': ['0', '0.2', '0.4']})
    print(table[['noise.delta', 'mean_error', 'max_error']].to_string(index=False))


def main():
    """Run the examples"""
    print("ElastoScan - Examples")
    print("=" * 40)
    print("1. Library pipeline (small, about a minute)")
    print("2. Preset run fig4-b")
    print("3. Noise sweep on f4")

    choice = input("Select example (1-3): ").strip()
    examples = {'1': example_library_pipeline, '2': example_preset_run, '3': example_sweep}
    if choice in examples:
        examples[choice]()
    else:
        print("Invalid choice")


if __name__ == "__main__":
    main()
