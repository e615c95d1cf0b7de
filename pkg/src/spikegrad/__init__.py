"""Spiking-network training with straight-through spike gradients.

A small numpy-backed library built around a leaky integrate-and-fire layer
whose spike step passes gradients straight through while the membrane
reset blocks them, plus the tensor tape that makes that work, the layers
and training loop for the two hybrid image-classification architectures,
firing-rate analytics, and a CLI that exports artifacts for the browser
explorer.
"""

from .data import (
    Dataset,
    LabeledImage,
    compression_factor,
    decode_columns,
    encode_columns,
    generate_synthetic,
    load_cache,
    load_image_dataset,
    save_cache,
)
from .lif import (
    LifOutput,
    LifParams,
    LifState,
    PhysicalNeuronParams,
    RateAnalytics,
    SpikeRaster,
    first_spike_step,
    lif_forward,
    lif_grad_input_closed_form,
    lif_grad_winput_closed_form,
    lif_grad_wleak_closed_form,
    min_input,
    physical_to_update_params,
    simulate_unit,
    steps_to_spike,
)
from .layers import Dense, Dropout, LifLayer, Lstm, Model
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    TensorError,
    backward,
    blocked_step,
    default_dtype,
    no_grad,
    passthrough_step,
    set_default_dtype,
)
from .training import (
    Adam,
    EpochMetrics,
    Sgd,
    TrainConfig,
    TrainRun,
    accuracy_time_averaged,
    build_network1,
    build_network2,
    confusion_counts,
    cross_entropy_time_distributed,
    evaluate,
    train,
)

__version__ = "0.1.0"
