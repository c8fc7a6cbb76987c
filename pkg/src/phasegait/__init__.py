"""Thigh-driven phase-variable control for a powered knee-ankle prosthesis.

The phase variable is a piecewise function of the global thigh angle chosen
by a five-state machine; knee and ankle follow Fourier virtual constraints
of that phase through PD torque control.
"""

__version__ = "0.1.0"

from .control import (
    DEFAULT_ANKLE_GAINS,
    DEFAULT_KNEE_GAINS,
    DerivativeFilter,
    JointCommand,
    JointController,
    PdGains,
    controller_step,
    desired_angles,
    pd_torque,
)
from .metrics import (
    Aggregate,
    MetricError,
    MetricReport,
    StrideSet,
    backward_step_symmetry,
    circumduction,
    pearson,
    segment_strides,
    symmetry_index,
    toe_clearance,
    vaulting_angle,
)
from .phase import (
    FsmState,
    PhaseConfig,
    PhaseEngine,
    PhaseEngineState,
    SensorSample,
    estimate_thigh_rate,
    stance_phase,
    swing_phase,
)
from .reference import (
    FourierConstraint,
    GaitDataError,
    GaitLandmarks,
    ReferenceGait,
    eval_constraint,
    extract_landmarks,
    fit_fourier,
    load_reference,
    synthesize_reference,
)
from .sim import (
    PlantModel,
    Scenario,
    SensorStream,
    SimTrace,
    generate_scenario,
    run_closed_loop,
    simulate,
    toe_trajectory,
)
