"""Indirect driver-automation shared steering control for steer-by-wire vehicles."""

from .agents import (
    AgentBundle,
    AuthorityWeights,
    agent_step,
    blend,
    build_bundle,
    rebuild_for_weights,
)
from .authority import (
    DetectorState,
    SwitchingConfig,
    apply_rule,
    detector_update,
    expected_driver_input,
)
from .predictor import (
    FeedbackGain,
    MpcConfig,
    PredictionWorkspace,
    StackedPredictor,
    TildePredictor,
    assemble_w_a,
    automation_command,
    build_tilde,
    driver_command,
    stack_prediction,
    synthesize_automation_gain,
    synthesize_driver_gain,
)
from .sim import (
    Metrics,
    PathShape,
    ReferencePath,
    ScenarioConfig,
    SimTrace,
    SimulationDiverged,
    compute_metrics,
    make_reference,
    run_scenario,
    verify_trace,
)
from .vehicle import (
    ContinuousDynamics,
    DiscreteDynamics,
    OutputSample,
    VehicleParams,
    VehicleState,
    build_continuous,
    discretize,
    output,
    step,
)

__version__ = "0.1.0"
