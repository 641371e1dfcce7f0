"""Quick end-to-end check of the Python bindings."""

import math

import beamtrack as bt

geom = bt.Geometry(1.0, 4)
beam = bt.Beam(i0=40.0, rho=0.2, x0=0.4, y0=0.4, lambda_n=2.0)

means = beam.mean_counts(geom)
assert len(means) == geom.cells == 16
total = 2 * math.pi * beam.i0 + beam.lambda_n * 4.0
assert abs(sum(means) - total) / total < 0.01

var_x, var_y = beam.crlb(geom)
assert var_x > 0 and abs(var_x - var_y) < 1e-12 * var_x

counts = beam.sample(geom, seed=7)
assert counts == beam.sample(geom, seed=7)
for name in ["mdc", "centroid", "auc", "ace1", "ace2", "nls", "mle"]:
    x, y, degenerate = bt.estimate(name, counts, geom, beam=beam, seed=1, generations=60)
    assert -1.0 <= x <= 1.0 and -1.0 <= y <= 1.0, name
    print(f"{name:>8}: ({x:+.3f}, {y:+.3f})")

mdc = bt.mdc_mse_bias(beam, geom)
cen = bt.centroid_mse_bias(beam, geom)
print(f"analytic rmse: mdc {math.sqrt(mdc['mse']):.4f}, centroid {math.sqrt(cen['mse']):.4f}")

slot = bt.Beam(i0=0.39, rho=0.2, x0=0.3, y0=-0.25, lambda_n=2.19)
gauss = bt.symbol_error(slot, (0.3, -0.25), geom)
mc = bt.symbol_error(slot, (0.3, -0.25), geom, trials=20000, seed=3)
assert gauss["method"] == "gaussian_approx" and mc["method"] == "monte_carlo"
assert abs(gauss["p_symbol_error"] - mc["p_symbol_error"]) < 0.05
print(f"SER gaussian {gauss['p_symbol_error']:.4f}, monte carlo {mc['p_symbol_error']:.4f}")

land = bt.snr_ratio_landscape(slot, bt.Geometry(1.0, 8), points=41)
ax, ay = land["argmax"]
assert abs(ax - 0.3) <= land["step"] + 1e-9 and abs(ay + 0.25) <= land["step"] + 1e-9

cfg = """
kind = crlb_sweep
seed = 1
geometry.half_width = 1.0
geometry.cells_per_side = 4
beam.i0 = 10
beam.lambda_n = 1
beam.rho = 0.2
beam.x0 = 0.1
beam.y0 = 0.1
sweep.variable = rho
sweep.values = 0.1, 0.2
"""
out = bt.run_config(cfg)
assert out["failures"] == []
assert len(out["csv"].strip().splitlines()) == 1 + 2 * 3
try:
    bt.run_config("kind = nonsense\n")
except ValueError as e:
    print(f"config error reported: {e}")
else:
    raise AssertionError("bad config accepted")

print("smoke test passed")
