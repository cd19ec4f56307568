"""Quick end-to-end check of the Python bindings."""

import json
import math

import qrepeater as q

pair, p = q.distribute_pair(1.0, 25.0)
assert abs(pair.fidelity() - 0.6412268) < 1e-6, pair
assert pair.dominant() == "psi+"
assert pair.rank() == 2
assert 0 < p < 1

rho, _ = q.distribute_quad(0.75, 10.0)
assert len(rho) == 16 and abs(sum(rho[k][k] for k in range(16)) - 1) < 1e-12

purified, p_succ = q.purify(0.75, 5.0)
assert purified.fidelity() > pair.fidelity()
assert abs(purified.fidelity() - 0.996531) < 1e-6
assert 0 < p_succ < 0.25

seg = q.BellDiagonalPair([0.0, 0.9, 0.0, 0.1])
assert abs(q.swap(seg).weights[1] - 0.756) < 1e-12
assert abs(q.swap(seg, "dynamical").weights[1] - 0.738) < 1e-12
assert abs(q.chain_compose(0.9, 3) - 0.756) < 1e-12

params = q.RepeaterParams(alpha=1.0, ell_km=11.0, n_segments=3)
assert abs(q.rate(params) - 18.987) < 1e-2
assert abs(q.success_probability(q.RepeaterParams(alpha=1.0, ell_km=11.0)) - 0.014) < 5e-4
ell = q.solve_segment_length(q.RepeaterParams(alpha=1.0, n_segments=15), 0.8)
assert 4.5 <= ell <= 6.0, ell
assert math.isinf(q.solve_segment_length(q.RepeaterParams(alpha=1.0), 0.5))

try:
    q.RepeaterParams(n_segments=4)
except ValueError:
    pass
else:
    raise AssertionError("even segment count accepted")

report = json.loads(q.validate_appendix("xy_effective"))
assert report["final_state_fidelity"] >= 0.99, report["final_state_fidelity"]

print("python smoke test passed")
