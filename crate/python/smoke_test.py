"""Smoke test for the pyambo extension.

Build and install first:
    pip install maturin && maturin develop -m crates/python/Cargo.toml
then run:
    python python/smoke_test.py
"""

import json
import math
import tempfile

import pyambo


def main():
    g = 1 / math.sqrt(math.pi)
    for t in (0.0, 0.7, 2.0):
        assert abs(pyambo.induced_gamma([math.cos(t), math.sin(t)]) - g) < 1e-6

    torus = pyambo.Geometry.torus(128)
    disk = pyambo.PhaseField.circle(torus, [0.5, 0.5], 0.2)
    assert disk.is_binary() and len(disk) == 128 * 128
    model = pyambo.EnergyModel(torus, 4e-3, pv=1.0, sp=0.0, sv=0.0)
    exact = 2 * math.pi * 0.2 * g
    err = abs(model.energy(disk) - exact) / exact
    assert err < 0.1, err
    print(f"disk energy relative error {err:.4f}")

    traj = pyambo.run_scheme(model, disk, max_steps=20)
    assert traj.status in ("stationary", "max_steps", "oscillation")
    assert max(abs(v - traj.volumes[0]) for v in traj.volumes) <= torus.spacing ** 2
    print(f"volume-preserving run: {traj.status} after {traj.steps} steps")

    band = pyambo.Geometry.band(256, 0.1, 0.7)
    cap = pyambo.PhaseField.from_shape(band, json.dumps({"shape": "cap", "center_x": 0.5, "radius": 0.25, "angle_deg": 90.0}))
    wet = pyambo.EnergyModel(band, 4e-3, pv=1.0, sp=0.75, sv=0.75)
    traj = pyambo.run_scheme(wet, cap)
    left, right = pyambo.contact_angle(band, traj.final_u, traj.level, method="arc", exclusion=3 * math.sqrt(4e-3))
    print(f"neutral wetting contact angles {left:.1f} {right:.1f}")
    assert abs(0.5 * (left + right) - 90.0) < 5.0

    config = """
experiment = "validate"
[grid]
dim = 2
n = 64
"""
    with tempfile.TemporaryDirectory() as out:
        summary = json.loads(pyambo.run_experiment(config, out))
    assert summary["status"] == "ok", summary["status"]

    try:
        pyambo.run_experiment(config + "bogus = 1\n", ".")
    except ValueError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")
    print("pyambo smoke test passed")


if __name__ == "__main__":
    main()
