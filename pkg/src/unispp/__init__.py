"""Fast spatial power profiles for Raman-pumped multiband links."""
from .assess import Assessment, assess_link
from .gsnr import (ChannelResult, CubicNLI, TableNLI, ThroughputCurve, ZeroNLI, gsnr,
                   make_estimator, objective, throughput_from_gsnr)
from .link import (Band, BandPlan, ConfigurationError, FiberSpan, FrequencyRangeError,
                   LaunchSpectrum, Lightwave, RamanGainProfile, build_channel_grid,
                   default_span, evaluate_spectrum_dBm, raman_gain, resolve_alpha, sigma)
from .noise import (NoiseBudget, accumulate_link_noise, ase_dfa, ase_raman, dfa_gain,
                    drb_span, span_noise)
from .reference import RelaxationSettings, compare_profiles, solve_bvp_span, solve_with_fallback
from .unidir import (Diverged, NotConverged, PowerMatrix, SolverOptions, SolverReport,
                     solve_span, trapezoid_matrix)

__version__ = "0.1.0"
