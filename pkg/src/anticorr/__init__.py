"""Beam-splitter coincidence experiment simulator and analysis toolkit.

Simulates a two-photon source feeding a trigger detector and a beam splitter
with two output detectors, under either of two detector physics lanes (single
collapse event per packet, or independently saturating absorber banks), and
provides the full coincidence-estimation and decision pipeline that tells the
two apart, plus a joint-distribution feasibility checker for the three-variable
no-common-distribution argument.
"""

__version__ = "0.1.0"

from .apparatus import (
    AbsorberBank,
    ApparatusConfig,
    Channel,
    PhysicsModel,
    apply_dead_time,
    detect_copenhagen,
    detect_planck,
    planck_dot_counts,
)
from .bell import (
    FeasibilityResult,
    InfeasibilityCertificate,
    JointDistribution,
    PairwiseSpec,
    check_feasibility,
    conjunction_bound,
)
from .coincidence import (
    CoincidenceReport,
    LowIntensityDiagnostic,
    NoTriggerEventsError,
    ProbEstimate,
    ScanPoint,
    Verdict,
    WindowConfig,
    estimate_p,
    low_intensity_guard,
    recover_gaussian_sigma,
    recover_plateau_width,
    render_verdict,
    shape_scan,
    wilson_interval,
)
from .pipeline import (
    ExperimentResult,
    PoissonDiagnostic,
    ShapeScanResult,
    analyze_file,
    analyze_streams,
    run_experiment,
    run_poisson_diagnostic,
    run_shape_scan,
    simulate,
)
from .runconfig import (
    AnalysisConfig,
    ConfigError,
    PlanckBankConfig,
    RunConfig,
    SPECIES_PRESETS,
    build_run_config,
    load_run_config,
)
from .source import (
    EmissionSequence,
    EnvelopeSpec,
    SourceConfig,
    WavePacketPair,
    expected_overlap_probability,
    generate_emissions,
)
from .timetag import (
    BadMagicError,
    CTAGError,
    CorruptRecordError,
    EventStreams,
    StreamOrderingError,
    TruncatedStreamError,
    UnsupportedVersionError,
    encode_stream,
    export_csv,
    read_stream,
    write_stream,
)
