"""Laser-assisted decay of a quasistationary state through a rectangular barrier.

Semiclassical (imaginary time method) spectra and rates, with a grid-based
Schroedinger propagator as the independent reference.  Atomic units
throughout.
"""

__version__ = "0.1.0"

from .params import (BarrierSpec, DimlessParams, Envelope, FieldSpec, QSState, StateError,
                     derive_state, dimensionless, validity_report)
from .field import eval_field, field_model, pulse_net_momentum
from .itm.action import action_full, action_weakfield, field_free_action, field_free_rate
from .itm.saddles import SaddlePoint, solve_saddles_monochromatic, solve_saddles_pulse
from .itm.spectrum import (Spectrum, SpectrumKind, itm_rate, peak_momenta, spectrum_monochromatic,
                           spectrum_pulse, total_rate)

__all__ = [
    "__version__", "BarrierSpec", "DimlessParams", "Envelope", "FieldSpec", "QSState", "StateError",
    "derive_state", "dimensionless", "validity_report", "eval_field", "field_model",
    "pulse_net_momentum", "action_full", "action_weakfield", "field_free_action", "field_free_rate",
    "SaddlePoint", "solve_saddles_monochromatic", "solve_saddles_pulse", "Spectrum", "SpectrumKind",
    "itm_rate", "peak_momenta", "spectrum_monochromatic", "spectrum_pulse", "total_rate",
]
