"""Training classifiers on label-rebalanced data without losing the true prevalence.

Training sets are often assembled with a chosen label mix (for example one
positive per negative) while the population the model will face is heavily
imbalanced. This package trains small numpy models on such data with three
objectives: plain negative log-likelihood, the importance-weighted baseline,
and a Bayesian surrogate that divides the likelihood by a tracked estimate of
the label marginal.
"""
from .diffcore import ParamVector, Scorer, ScorerSpec, backward, forward, init_params
from .errors import (BiasCorrError, ConfigurationError, DegeneracyError, DomainError,
                     NumericError, PreconditionError, ShapeError, UsageError)
from .likelihoods import LikelihoodModel, log_prob, log_prob_grad, prob
from .losses import LossOutput, bayes_ig_loss, compute_loss, nll_loss, weighted_loss
from .marginal import (MarginalEstimate, MarginalTracker, PrevalenceSpec, beta_for,
                       estimate_marginal_eq3, estimate_marginal_eq12)
from .metrics import (ConfusionCounts, MetricsReport, calibration_error, confusion,
                      off_by_one_accuracy, report, roc_auc)
from .sampling import (BatchSampler, Dataset, PopulationModel, analytic_posterior, make_scenario,
                       sample_biased_trainset, sample_population)
from .trainer import TrainConfig, TrainTrace, evaluate, predict, train

__version__ = "0.1.0"
