"""A kernel-gated linear head.

``logits(x) = sum_u exp(-(g_u(x) / s)**2) * l_u(x)``: each unit is a linear
model that is switched on near the hyperplane ``g_u(x) = 0``. On data with
two positive clusters on either side of a negative band a linear model is
stuck near chance, while a few kernel units carve out the band.
"""
import numpy as np

from biascorr.diffcore import ScorerSpec
from biascorr.sampling import PopulationModel, sample_biased_trainset
from biascorr.trainer import TrainConfig, train

eye = 0.3 * np.eye(2)
model = PopulationModel(
    means=[[[0.0, 0.0]], [[-2.0, 0.0], [2.0, 0.0]]],
    covs=[[eye], [eye, eye]],
    weights=[[1.0], [0.5, 0.5]],
    true_marginal=[0.5, 0.5],
    name="band",
)
tr = sample_biased_trainset(model, [0.5, 0.5], 800, 0)
ev = sample_biased_trainset(model, [0.5, 0.5], 800, 1)

for spec in (ScorerSpec("mlp", 2, (), 2),
             ScorerSpec("kernel_head", 2, output_dim=2, kernel_units=4),
             ScorerSpec("composite", 2, (), 2, kernel_units=4)):
    cfg = TrainConfig(loss="nll", scorer=spec, steps=2000, learning_rate=0.05)
    _, trace = train(cfg, tr, ev)
    rep = trace.final.report
    print(f"{spec.kind:>12}: accuracy {rep.acc:.3f}  auc {rep.auc:.3f}")
