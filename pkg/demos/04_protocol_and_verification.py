"""A small end-to-end run: embed during FL, then verify without the key.

Trains a 6-client federation for 12 rounds with the watermark protocol,
calibrates a null distribution from unwatermarked models, and runs the
reconstruction-free coalition test. A plain model is checked as control.
"""

from twmark.experiments import (
    ExperimentConfig,
    make_coalition_verifier,
    run_plain_fedavg,
    run_watermarked,
)
from twmark.flsim import evaluate
from twmark.rngutil import rng_from_key
from twmark.verify import calibrate, model_fingerprint

cfg = ExperimentConfig(n_clients=6, threshold=3, rounds=12, n_samples=1920,
                       strength_c=0.1, seeds=(0,))

print("calibrating the null from two unwatermarked runs...")
models = [run_plain_fedavg(cfg, seed=100 + i, rounds=3)[1] for i in range(2)]
table = calibrate(models, 500, rng_from_key("demo-calibration"),
                  fingerprint=model_fingerprint(cfg.shape()))
print(f"null: mu = {table.mu:.2e}, sigma = {table.sigma:.2e}")

print("running the watermarked federation (K=6, t=3, 12 rounds)...")
setup, dataset, trajectory = run_watermarked(cfg, seed=0)
theta = trajectory[-1].theta
acc = evaluate(theta, dataset.X_test, dataset.y_test, cfg.shape())
print(f"final test accuracy: {acc:.4f}")

verifier = make_coalition_verifier(cfg, setup, table)
rep = verifier(theta)
print(f"coalition of t={setup.cfg.threshold}: z = {rep.z:.2f} "
      f"-> {'accept' if rep.accepted else 'reject'}")

control = verifier(models[0])
print(f"unwatermarked control:  z = {control.z:.2f} "
      f"-> {'accept' if control.accepted else 'reject'}")
