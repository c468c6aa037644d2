"""Time-bin entanglement simulation for CW vacuum--one-photon
superposition sources: exact Fock-space analytics, time-tag Monte Carlo,
coincidence correlation, and experiment orchestration."""

__version__ = "0.1.0"

from .fock import (FockBasis, FockState, ModeLabel, ModeNetwork, anc,
                   amplitude_oracle, apply_network, detection_probability,
                   make_basis, number_correlation, ph, postselect)
from .source import SourceParams, power_calibration
from .interferometer import (DEFAULT_TAU, FransonConfig, MultiportConfig,
                             build_amzi, build_franson, build_multiport,
                             multiport_postselect_probability)
from .analytics import (CHSH_SETTINGS, ChshResult, CorrelationMap, FringeFit,
                        chsh, coincidence_rate, exact_chsh, fit_fringe,
                        g2_map, singles_rate)
from .montecarlo import (CHANNELS, DetectorParams, RunConfig, TimeTagStream,
                         apply_detector_model, generate, phase_walk)
from .correlator import (CorrelationHistogram, autocorrelate, coincidences_at,
                         cross_correlate, cross_correlate_naive, normalize_g2)
from .tagio import read_csv, read_qtt, read_tags, write_csv, write_qtt
from .pipeline import (PUBLISHED_ANCHORS, Experiment, compare_to_anchor, run)
