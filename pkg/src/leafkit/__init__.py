"""leafkit: learnable Gabor-filterbank audio frontend and sensitivity analysis."""

__version__ = "0.1.0"

from .audio_io import AudioClip, SceneSpec, load_wav, mix_at_snr, normalize_dbfs, synthesize_scene
from .filterbank import GaborFilterbank, analytic_freq_response, gabor_kernel, project_params
from .frontend import FrontendParams, PcenParams, TFRep, forward
from .initializers import InitStrategy, build_filterbank, convert_frequency
from .sensitivity import FilterPmf, filter_pmf, jsd, kl_divergence, trajectory

__all__ = [
    "AudioClip", "SceneSpec", "load_wav", "mix_at_snr", "normalize_dbfs", "synthesize_scene",
    "GaborFilterbank", "analytic_freq_response", "gabor_kernel", "project_params",
    "FrontendParams", "PcenParams", "TFRep", "forward",
    "InitStrategy", "build_filterbank", "convert_frequency",
    "FilterPmf", "filter_pmf", "jsd", "kl_divergence", "trajectory",
    "__version__",
]
