"""
Inequalities as quadratic penalties
===================================

An inequality a.x <= b becomes a square with K slack bits.  With the
slack scale alpha_K the smallest penalty over the slack is at most 1/4
exactly for the feasible x, so the constraint can be read off a QUBO.
"""

import itertools

import numpy as np

from powerpart.penalties import LinearConstraint, SlackEncoding, degree_reduction, inequality_penalty, min_slack_values
from powerpart.qubo import QuadraticModel, VariableRegistry

a, b, K = (0.3, -0.2, 0.6), 0.5, 3
names = tuple(("x", i) for i in range(3))
m = QuadraticModel(VariableRegistry(names))
enc = inequality_penalty(LinearConstraint(names, a, b), K, m)
q = m.finalize()
print("alpha_K =", enc.alpha)

for x in itertools.product((0, 1), repeat=3):
    lhs = float(np.dot(a, x))
    best = min(q.evaluate(list(x) + list(z)) for z in itertools.product((0, 1), repeat=K))
    # the closed form gives the same minimum without enumerating the slack
    _, closed = min_slack_values(enc.scaled(lhs), K)
    print(x, f"a.x={lhs:+.1f}", "feasible" if lhs <= b else "violated", f"min penalty {best:.4f} {float(closed):.4f}")

# products of two bits get a fresh variable and a gadget that is zero iff z = xi*xj
g = QuadraticModel(VariableRegistry([("xi",), ("xj",)]))
degree_reduction(g, ("xi",), ("xj",), ("z",))
gq = g.finalize()
for bits in itertools.product((0, 1), repeat=3):
    print("xi xj z =", bits, "->", gq.evaluate(list(bits)))

# any scale above alpha_K pushes a point on the boundary over 1/4
enc = SlackEncoding(K, -0.2, b)
z, pen = min_slack_values(1.01 * enc.alpha * (b + 0.2), K)
print("boundary point at 1.01 alpha_K: slack", int(z), "penalty", float(pen))
