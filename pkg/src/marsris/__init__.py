"""marsris: terrain-aware radio propagation and RIS coverage simulation for
Martian surface links."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DelegatedInteractionError,
    GeometryError,
    GridExtentError,
    GridParseError,
    InvalidPositionError,
    NoCoverageError,
    OutOfBoundsError,
    SimulationError,
    UnsupportedFrequencyError,
)
from .terrain import (
    Canyon,
    Crater,
    HeightField,
    Hill,
    LandformSpec,
    Plateau,
    Position3,
    Ray,
    dump_ascii_grid,
    generate_flat,
    generate_landform,
    intersect_ray,
    line_of_sight,
    load_ascii_grid,
)
from .propagation import (
    AtmosphereProfile,
    FieldContribution,
    GroundReflection,
    LinkBudget,
    MaterialProperties,
    Polarization,
    PropagationPath,
    RisInteraction,
    aggregate_power_dbm,
    atmospheric_attenuation_db,
    complex_permittivity,
    free_space_path_loss_db,
    fresnel_reflection,
    path_field,
    snr_db,
)
from .ris import (
    Active,
    Amplifying,
    CascadeResult,
    Codebook,
    CodebookEntry,
    Passive,
    PhaseConfiguration,
    PowerEstimate,
    RisKind,
    RisPanel,
    SemiPassive,
    Star,
    StarMode,
    cascade_received_power,
    element_positions,
    generate_codebook,
    ris_power_consumption,
    steered_cascade_power,
    steering_phase_profile,
)
from .localization import (
    AngleEstimate,
    SweepContext,
    SweepMeasurement,
    TwoStageResult,
    beam_sweep,
    configure_from_estimate,
    estimate_angle,
    two_stage_sweep,
)
from .scenario import (
    CodebookStrategy,
    ComparisonReport,
    HeatmapResult,
    Node,
    OracleCsi,
    ReceiverGrid,
    Scenario,
    build_reference_crater_scenario,
    compare_ris_kinds,
    recommend_ris,
    run_heatmap,
    write_comparison_csv,
    write_heatmap_csv,
    write_heatmap_pgm,
    NO_COVERAGE_SNR_DB,
)
