"""Quick end-to-end check of the qtrack extension module."""

import json
import math
from pathlib import Path

import qtrack

q = qtrack.Quantizer.preset()
assert [q.quantize(y) for y in (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)] == [0, 0, 1, 1, 2, 2, 3]
assert q.weight(3) == -80.0

omega = qtrack.Omega.rect(-6.0, 6.0, -2.0, 2.0)
assert omega.project((7.0, 1.0)) == (6.0, 1.0)
assert omega.contains((1.0, 1.0))

# standard normal, theta_hat . phi = 1
a = qtrack.predicted_weight((1.0, 0.0), (1.0, 0.0), q)
assert math.isclose(a, -38.853635283849103565, rel_tol=1e-9), a

u = qtrack.adaptive_control((4.0, 1.0), 2.0, 0.5)
assert math.isclose(4.0 * u + 1.0 * 0.5, 2.0)
assert qtrack.min_phase_margin((4.0, 1.0)) == 3.0

c = qtrack.constants(2.1, 3, 1.0, 3.0, 2.0, 6.5, q)
assert math.isclose(c["input_bound"], math.sqrt(2.0) * 2.1)

try:
    qtrack.Quantizer([0.0, 0.0], [1.0, 0.0, -1.0])
except ValueError as e:
    assert "NonAscendingThresholds" in str(e)
else:
    raise AssertionError("expected ValueError")

trial = qtrack.Experiment.example(horizon=500, trials=1, seed=3).run_trial()
assert len(trial["err_sq"]) == 500 and trial["step_bound_violations"] == 0

config = json.loads((Path(__file__).resolve().parents[3] / "configs" / "example.json").read_text())
config.update(horizon=2000, trials=20)
summary = qtrack.Experiment.from_json(json.dumps(config)).run_montecarlo()
assert summary["trials_completed"] == 20
assert summary["mse_curve"][-1] < summary["mse_curve"][0]
print(f"slope {summary['slope']:.3f}, tail tracking {summary['tail_tracking_mean']:.3f}")
print("smoke ok")
