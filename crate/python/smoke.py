"""Quick end-to-end check of the Python bindings."""

import math

import autoneb

dw = autoneb.Landscape.double_well()
assert dw.dim == 2
loss, grad = dw.evaluate([1.0, 1.0])
assert loss == 0.0 and grad == [0.0, 0.0]

schedule = autoneb.Schedule(cycles=[(200, 0.05)] * 4 + [(200, 0.005)] * 4, weight_decay=0.0)
out = autoneb.auto_neb(dw, [-1.0, 1.0], [1.0, 1.0], schedule)
grid, _ = autoneb.grid_mep(dw, [-1.0, 1.0], [1.0, 1.0], -2.0, 2.0, 201)
print(f"double well: autoneb saddle {out['saddle_loss']:.4f}, grid {grid:.4f}, {len(out['pivots'])} pivots")
assert abs(out["saddle_loss"] - 1.0) < 0.02 and abs(grid - 1.0) < 0.02

pivots = autoneb.redistribute([[0.0, 0.0], [0.1, 0.0], [1.0, 0.0]])
assert math.isclose(pivots[1][0], 0.5)

xor = autoneb.Landscape.xor([2, 3, 1])
p = autoneb.train_minimum(xor, xor.init_params(0), 0.05, 5000)
q = autoneb.permute_hidden_units(xor, p, 1, [1, 0, 2])
assert math.isclose(xor.loss(p), xor.loss(q), rel_tol=1e-12)
print(f"xor: loss {xor.loss(p):.2e}, misclassified {xor.misclassified(p)}")

wells = autoneb.Landscape.random_wells(3, 0)
minima = [autoneb.train_minimum(wells, autoneb.init_uniform(2, -1.5, 1.5, s), 0.01, 2000, weight_decay=0.0)
          for s in range(3)]
g = autoneb.explore(wells, minima, budget=3, schedule=autoneb.Schedule(cycles=[(100, 0.05)] * 2, weight_decay=0.0))
print(f"explore: {g['runs']} runs, stop {g['stop']}, history {g['mst_max_history']}")

bound = autoneb.ultrametric_bound([0.0, 0.0, 0.0], [(0, 1, 2.0), (1, 2, 1.0)], 0, 2)
assert bound == 2.0

try:
    autoneb.auto_neb(dw, [0.0, 0.0], [1.0, 1.0, 1.0])
except ValueError:
    pass
else:
    raise AssertionError("dimension mismatch accepted")

print("ok")
