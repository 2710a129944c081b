"""Exact check of the bias-corrected posterior on enumerable toy problems.

With finite feature, label and parameter alphabets every quantity can be
summed out. A label-biased dataset (labels drawn from ``ptilde``, features
from the class conditionals) gives the posterior
``p(w) prod_n p(x_n | y_n, w)``; the surrogate
``p(w) prod_n p(y_n | x_n, w) / p(y_n | w)`` should agree to rounding.
"""
import numpy as np

from biascorr.oracle import (bayes_prediction_risk, map_plugin_rule, posterior_firstprinciples,
                             posterior_predictive_rule, posterior_surrogate, prior_predictive_rule,
                             random_problem, random_rule, run_equivalence_suite, sample_toy_data)

rng = np.random.default_rng(0)
problem = random_problem(rng, n_x=6, n_y=3, n_w=40)
data = sample_toy_data(problem, w_index=7, ptilde=[0.6, 0.3, 0.1], n=10, rng=rng)
a = posterior_firstprinciples(problem, data)
b = posterior_surrogate(problem, data)
print("max |difference| on one instance:", np.max(np.abs(a - b)))
print("posterior mode:", int(np.argmax(b)), "true w: 7")

results, elapsed = run_equivalence_suite(instances=100, tol=1e-10)
print(f"{sum(r.passed for r in results)}/100 random instances agree to 1e-10 ({elapsed:.2f}s)")

# the posterior predictive has the lowest expected log loss among prediction rules
small = random_problem(np.random.default_rng(4), n_x=2, n_y=2, n_w=4)
for name, rule in [("posterior predictive", posterior_predictive_rule),
                   ("prior predictive", prior_predictive_rule),
                   ("MAP plug-in", map_plugin_rule),
                   ("random table", random_rule(0))]:
    print(f"{name:>22}: risk {bayes_prediction_risk(small, rule, [0.5, 0.5], n=3):.6f}")
