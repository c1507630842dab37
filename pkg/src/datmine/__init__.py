"""datmine: mining and embedding of learner access trajectories.

The package turns raw clickstream event logs into per-learner day-by-component
access matrices, mines repeat-viewing behavior patterns and video-to-forum
usage statistics from them, and embeds whole trajectories into low-dimensional
vectors through three independent pipelines (handcrafted features, DTW
distances + classical MDS, and a convolutional autoencoder) for 2-D
visualization with t-SNE.  A seeded synthetic cohort generator with exact
planted pattern counts serves as ground truth for end-to-end checks.
"""

from .dat import CATEGORIES, BoundsError, CourseSpec, Dat, DenseDat

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "BoundsError",
    "CourseSpec",
    "Dat",
    "DenseDat",
    "__version__",
]
