"""Numerical evaluation of the AG-L and UCB-L regret bounds."""
from .orderstats import (DiscreteMeanDist, NormalMeanDist, bernoulli_mean_dist, estimate_dist,
                         expect_over_max, max_mass_exact, max_pdf, total_mass)
from .permanent import MAX_PERMANENT_SIZE, permanent, permanent_naive
from .theorem1 import (BoundReport, HistoryMatrix, Theorem1Setup, U_step, bound_monotonicity_probe,
                       theorem1_bound, u_bound)
from .theorem3 import Epoch, EpochPartition, epoch_partition, theorem3_bound

__all__ = [
    "BoundReport", "DiscreteMeanDist", "Epoch", "EpochPartition", "HistoryMatrix",
    "MAX_PERMANENT_SIZE", "NormalMeanDist", "Theorem1Setup", "U_step", "bernoulli_mean_dist",
    "bound_monotonicity_probe", "epoch_partition", "estimate_dist", "expect_over_max",
    "max_mass_exact", "max_pdf", "permanent", "permanent_naive", "theorem1_bound",
    "theorem3_bound", "total_mass", "u_bound",
]
