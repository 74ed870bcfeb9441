"""A d-stationary point of a truncated nuclear norm problem that is not a local minimum.

F(X) = <C, X> + gamma * sigma_2(X) with C = diag(-gamma, 0) and
X* = diag(1, 2).  No probe direction decreases F to first order, yet
moving along Y = [[2, -1], [-1, 2]] lowers F at second order.
"""

from tlx import counterexample_report

rep = counterexample_report(gamma=1.0, radius=0.5, samples=500)

print(f"smallest probed directional derivative: {rep['probe_residual']:+.2e} over {rep['probes']} probes")
print(f"largest sampled decrease within radius 0.5: {rep['max_decrease']:.4f}")
print("objective change along X* + xi Y (sampled vs closed form):")
for point in rep["h_curve"]:
    print(f"  xi={point['xi']:.2f}  {point['h']:+.6f}  {point['closed_form']:+.6f}")
print(f"separates the two notions: {rep['separates']}")
