"""The full command-line workflow, driven from Python.

Shells out to the `twmark` CLI exactly as a user would: write a config,
calibrate, train, then verify with a coalition of share files. Runs at a
reduced budget; expect a couple of minutes.
"""

import os
import subprocess
import sys
import tempfile

workdir = tempfile.mkdtemp(prefix="twmark-demo-")
config = os.path.join(workdir, "config.txt")
overrides = [
    "n_clients=6", "threshold=3", "rounds=12", "n_samples=1920",
    "strength_c=0.1", "calib_models=2", "calib_rounds=3", "calib_keys=500",
    "seeds=(0,)",
]


def run(*args):
    cmd = [sys.executable, "-m", "twmark.cli", *args]
    print("+", " ".join(cmd))
    proc = subprocess.run(cmd, text=True, capture_output=True)
    print(proc.stdout, end="")
    if proc.returncode not in (0, 1):
        print(proc.stderr, end="", file=sys.stderr)
        raise SystemExit(proc.returncode)
    return proc.returncode


from twmark.experiments import ExperimentConfig

ExperimentConfig.with_overrides({}, overrides).save(config)

run("calibrate", "--config", config, "--out", workdir)
run("train", "--config", config, "--out", workdir)

rundir = os.path.join(workdir, "run_seed0")
model = os.path.join(rundir, "model_final.bin")
calib = os.path.join(workdir, "calibration.txt")
shares = [os.path.join(rundir, "shares", f"client_{k}.share") for k in (1, 2, 3)]

print("\nverifying with a coalition of 3 shares (exit 0 = accept):")
code = run("verify", "--model", model, "--calibration", calib, *shares)
print(f"exit code: {code}")

print("\nverifying with too few shares (expected to fail):")
proc = subprocess.run([sys.executable, "-m", "twmark.cli", "verify",
                       "--model", model, "--calibration", calib, shares[0]],
                      text=True, capture_output=True)
print(proc.stderr.strip())
print(f"exit code: {proc.returncode}")

print(f"\nartifacts left in {workdir}")
