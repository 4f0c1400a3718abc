"""Practice-mode scheduling for piano learners.

Learns from recorded expert-learner sessions which practice mode (pitch vs
timing) a teacher would pick next, by regressing practice utility with a
Gaussian process and Bayesian-optimizing the utility weights, and serves
recommendations in a live session loop.
"""

__version__ = "0.1.0"

from . import baselines, dataset, gp, policy, score_perf, simulator  # noqa: E402

__all__ = [
    "__version__",
    "baselines",
    "dataset",
    "gp",
    "policy",
    "score_perf",
    "simulator",
]
