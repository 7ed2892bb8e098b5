"""Coherence of a qubit under strong discrete dephasing noise and pulse
modulation: filter transforms, Bessel-model coherence, Monte Carlo and
Ramsey-fringe simulation, and tone identification and fitting."""

from .coherence import (
    CoherenceValue,
    FringeScan,
    coherence_mixing,
    coherence_monte_carlo,
    coherence_product,
    phase_integral,
    ramsey_probability,
    simulate_fringe,
    weak_coherence,
)
from .errors import IllConditionedError, InvalidArgumentError, ModeMismatchError, NotCrossedError
from .noise import (
    DiscreteSpectrum,
    NoiseTone,
    UnitsConfig,
    default_units,
    field_from_tone,
    noise_index,
    sample_noise,
    tone_from_field,
)
from .schedule import (
    PulseSchedule,
    TogglingFunction,
    filter_dc_slope,
    filter_peak,
    filter_transform,
    make_equidistant,
    make_schedule,
    make_uhrig,
    toggling,
)

__version__ = "0.1.0"
