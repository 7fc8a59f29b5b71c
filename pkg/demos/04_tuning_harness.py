"""Small end-to-end experiment through the tuning harness.

Uses a reduced grid so it finishes in under a minute; the acceptance
suite runs the full protocol. Writes report.json/curves.csv/audit.json
into ./demo_out.
"""

from dpcd import ExperimentSpec, HyperGrid, run_experiment

spec = ExperimentSpec(
    dataset={"kind": "sparse_lasso", "n": 500, "p": 50, "k_active": 5,
             "label_noise_std": 1.0, "seed": 1, "weight_scale": 10.0},
    loss="squared", regularizer="l1", reg_strength=1.0,
    epsilon=2.0, delta=None,                     # delta defaults to 1/n^2
    algorithms=("dp_cd", "dp_sgd"),
    grid=HyperGrid(cd_step_scales=(0.5, 1.0, 2.0),
                   sgd_step_scales=(0.01, 0.1, 1.0),
                   clip_scales=(10.0, 100.0, 1000.0, 10000.0),
                   passes=(2, 10)),
    tuning_runs=3, eval_runs=5, base_seed=0)

report = run_experiment(spec, n_jobs=2, out_dir="demo_out")

for algo, rep in report.algorithms.items():
    best = rep["best"]
    print(f"{algo:8s} best: passes={best['passes']} step={best['step_scale']:g} "
          f"clip={best['clip_scale']:g}")
    for entry in rep["per_pass"]:
        ev = entry["eval"]
        print(f"  passes={entry['passes']:3d}: relative error "
              f"min/mean/max = {ev['min']:.4f}/{ev['mean']:.4f}/{ev['max']:.4f}")
print("\nartifacts written to ./demo_out (report.json, curves.csv, audit.json)")
