"""Four-tier EEG pipeline: spectrogram, pseudo-SNN episode coding, snapshot transpose, attention."""
from .ablation import VARIANTS, VariantConfig
from .datagen import STAGES, Dataset, GenConfig, RawSignal, generate_sample, load_dataset, make_dataset
from .train import ModelConfig, ModelParams, OptConfig, evaluate, forward_sample, init_model, train_epochs

__version__ = "0.1.0"
