"""Structural analytics for retweet cascades.

Rebuilds cascade graphs from event logs, computes the ten-dimensional
structural metric vector, fits heavy-tailed/bimodal metric distributions,
clusters growth dynamics, and quantifies structural distinguishability
between cascade groups.
"""

__version__ = "0.1.0"

from .cascade import (BuildResult, CascadeBuilder, CascadeGraph,
                      DepthAssignment, GrowthSeries, RejectRecord,
                      RetweetEvent, build_cascades, build_from_tsv,
                      compute_depths, growth_series)
from .distfit import (BimodalFit, BinnedPdf, FitResult, Model, bimodal_pdf,
                      fit_bimodal, levenberg_marquardt, log_binned_pdf)
from .dynamics import ClusterModel, NormalizedSeries, kmeans, normalize
from .groupstats import (DistinguishabilityMatrix, GroupedMetricTable,
                         JointHistogram, join_labels, joint_histogram,
                         kruskal_wallis, pairwise_distinguishability)
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import (MetricConfig, MetricVector, Silhouette, metric_table,
                      metric_vector, silhouette, venn_tallies)
from .synth import GeneratorSpec, GroundTruth, generate, generate_corpus
