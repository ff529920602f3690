"""hexfm: reservoir forward models in a closed-loop hexapod walking test bench."""

from .control import (
    AccumulatorPair,
    AdaptiveController,
    BackboneJoint,
    BaselineBank,
    BaselineModel,
    ControlGains,
    ForwardModelBank,
    instantaneous_error,
    leg_offsets,
)
from .config import RunConfig, load_config
from .cpg import (
    DelayLine,
    Gait,
    LEGS,
    MotorFrame,
    MotorPipeline,
    PcpgShaper,
    So2Oscillator,
    default_gait_table,
    gait_diagram,
)
from .errors import ConfigurationError, InputError, NumericError
from .harness import (
    RunLog,
    collect_flat,
    compute_summary,
    nmse,
    run_prediction_eval,
    run_scenario,
    run_sweep,
    run_training,
)
from .plant import (
    Corruption,
    Plant,
    Segment,
    Terrain,
    inject_corruption,
    lag_model,
    progress_metrics,
)
from .readout import GAITS, RlsReadout, batch_ridge_oracle
from .reservoir import (
    Reservoir,
    ReservoirParams,
    kl_to_exponential,
    spectral_radius_estimate,
)

__version__ = "0.1.0"
