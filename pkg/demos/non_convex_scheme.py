"""The scheme with phi(s) = s**2 and the arithmetic mean is not displacement convex."""

from fpconvex import convexity, counterexample

comparison = counterexample.compare_with_reference()
print(f"{'monomial':>16} {'computed':>10} {'reference':>10}")
for row in comparison.rows:
    mark = "" if row["match"] else "  *"
    print(f"{row['monomial']:>16} {row['computed']:>10} {row['reference']:>10}{mark}")
print(f"{len(comparison.mismatches)} of {len(comparison.rows)} coefficients differ")

# A single peak already makes the minor negative.
print("minor at (0, 0, 1, 0, 0):", counterexample.counterexample_minor([0, 0, 1, 0, 0]))

wit = counterexample.find_witness(seed=0)
rep = convexity.certify(counterexample.em_tilde_m(wit.rho), counterexample.em_edge_weights(wit.rho), 0.0)
print(f"witness after {wit.draws} draws: rho = {wit.rho.round(4)}, minor {wit.minor:.4f}")
print(f"certificate {rep.certificate.value}, smallest eigenvalue {rep.smallest_eigenvalue:.4f}")
