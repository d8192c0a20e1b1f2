"""CRB-driven pose optimization of six-dimensional movable antenna (6DMA) surfaces."""

from .channel import channel_derivative, channel_terms, channel_vector, simulate_echo, wavelength
from .estimation import (CrbReport, ProbeSignal, SingularFisherError, crb_per_target, crb_report,
                         crb_total, fisher_information)
from .geometry import (ArrayLayout, LocalArray, MovementConstraints, SiteSpace, SurfacePose,
                       check_constraints, rotation_matrix)
from .harness import ExperimentConfig, load_config, load_layout, run_experiment, save_layout
from .pattern import DirectivePattern, IsotropicPattern, make_pattern
from .pso import PsoParams, optimize
from .scenario import SensingRegion, SensingScenario, build_targets, partition_region
from .schemes import SchemeKind, build_fpa, optimize_6dma, optimize_fa_ma

__version__ = "0.1.0"
