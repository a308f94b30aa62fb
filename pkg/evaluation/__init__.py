from .metrics import MetricReport, NoSegmentsError, ate, evaluate, kitti_rel_errors, rpe
from .perturb import PerturbationError, PerturbMode, perturb
from .trajectory import Trajectory, accumulate
