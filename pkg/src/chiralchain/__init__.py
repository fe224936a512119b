"""Photon correlations of light transmitted through a chirally coupled emitter chain."""

from .core import (
    ComplexCurve,
    DataError,
    G2Curve,
    NumericalError,
    ParameterError,
    PhysicalParams,
    TauGrid,
    time_unit_ns,
    validate_params,
)
from .transport import (
    ChainState,
    RateReport,
    chain_g2,
    chain_g2_zero,
    chain_steady_state,
    chain_transmission,
    chain_two_photon_amplitude,
    find_perfect_antibunching,
    od_per_atom,
    single_atom_g2,
    transmission_coefficient,
)
from .oracle import (
    OracleConfig,
    build_cascaded_generator,
    oracle_g2,
    oracle_steady_state,
    oracle_transmission,
)
from .ensemble import (
    NumberDistribution,
    OdBinSpec,
    SweepRow,
    averaged_g2,
    averaged_g2_zero,
    build_number_distribution,
    od_to_atoms,
    sweep_g2_vs_od,
)
from .photonstats import (
    CoincidenceHistogram,
    FitResult,
    RunRecord,
    SaturationData,
    SaturationFit,
    TimeTagStream,
    bin_runs_by_od,
    bootstrap_error,
    curve_values_ns,
    fit_beta_saturation,
    histogram_timetags,
    mle_fit_g2,
    normalize_histogram,
    saturation_transmission,
    synth_histogram,
    synth_saturation_data,
    synth_timetags,
)

__version__ = "0.1.0"
