"""Forward-propagation families: plain stacks, residual pairs, dense stacks.

Bias convention, centralized here: layers carry an *additive* bias (the
network convention), and a thresholding step with threshold t is the same
layer with bias -t. Pursuit-mode constructors derive bias = -beta / L so
the two conventions never conflict.

Signals and codes flow through the models as arrays of shape
(*spatial, channels); the flat, position-major form used by the
dictionaries is produced only at the dictionary boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import pursuit
from .dictionary import (
    SAME,
    ConvDictionary,
    MSDDictionary,
    random_dictionary,
)
from .errors import ShapeError
from .numeric import relu, soft_threshold

SOFT = "soft"
NONNEG = "nonneg"


def stack_to_code(stack, passthrough_channels):
    """Channel-stacked array (*spatial, c + w) -> flat MSD code (I-block | conv-block)."""
    stack = np.asarray(stack, dtype=float)
    return np.concatenate(
        [
            stack[..., :passthrough_channels].ravel(),
            stack[..., passthrough_channels:].ravel(),
        ]
    )


def code_to_stack(code, spatial_shape, passthrough_channels, width):
    """Inverse of :func:`stack_to_code`."""
    code = np.asarray(code, dtype=float)
    n_pos = int(np.prod(spatial_shape))
    split = n_pos * passthrough_channels
    identity_part = code[:split].reshape(*spatial_shape, passthrough_channels)
    conv_part = code[split:].reshape(*spatial_shape, width)
    return np.concatenate([identity_part, conv_part], axis=-1)


@dataclass
class LayerParams:
    """One layer: kernel bank F_i, per-kernel additive bias, step scale c_i.

    ``scale=None`` means 1 / L of the layer's dictionary, resolved lazily.
    ``passthrough_bias`` only matters for dense (MSD) layers, where it is
    the additive bias on the identity channels (0 in network mode).
    """

    kernel_bank: ConvDictionary
    bias: np.ndarray
    scale: float | None = None
    passthrough_bias: float = 0.0

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float)
        if self.bias.shape != (self.kernel_bank.width,):
            raise ShapeError(
                f"bias of shape {self.bias.shape} does not match kernel count "
                f"{self.kernel_bank.width}"
            )
        if self.scale is not None and self.scale <= 0:
            raise ShapeError("scale must be positive")
        self._lipschitz_cache = {}

    def msd_dictionary(self):
        return MSDDictionary(self.kernel_bank)

    def lipschitz(self, msd=False):
        key = "msd" if msd else "conv"
        if key not in self._lipschitz_cache:
            operator = self.msd_dictionary() if msd else self.kernel_bank
            self._lipschitz_cache[key] = pursuit.lipschitz_constant(operator)
        return self._lipschitz_cache[key]

    def effective_scale(self, msd=False):
        if self.scale is not None:
            return self.scale
        return 1.0 / self.lipschitz(msd=msd)

    @classmethod
    def pursuit_mode(cls, kernel_bank, beta, msd=False):
        """Layer whose forward pass is one ISTA step: c = 1/L, bias = -beta/L."""
        layer = cls(
            kernel_bank,
            bias=np.zeros(kernel_bank.width),
            scale=None,
            passthrough_bias=0.0,
        )
        lipschitz = layer.lipschitz(msd=msd)
        layer.scale = 1.0 / lipschitz
        layer.bias = np.full(kernel_bank.width, -beta / lipschitz)
        layer.passthrough_bias = -beta / lipschitz if msd else 0.0
        return layer


def _activate(pre, bias, operator):
    if operator == NONNEG:
        return relu(pre + bias)
    if operator == SOFT:
        return soft_threshold(pre, -np.asarray(bias, dtype=float))
    raise ShapeError(f"unknown thresholding operator {operator!r}")


def _plain_layer_step(layer, x, operator):
    conv = layer.kernel_bank
    if x.shape != conv.input_shape:
        raise ShapeError(
            f"layer input of shape {x.shape} does not match dictionary input "
            f"{conv.input_shape}"
        )
    pre = layer.effective_scale() * conv.adjoint_array(x)
    return _activate(pre, layer.bias, operator)


@dataclass
class MLCSCModel:
    """Plain stack: each layer is one thresholded adjoint-apply."""

    layers: list[LayerParams]

    @property
    def depth(self):
        return len(self.layers)


def mlcsc_forward(model, x):
    """Layered nonnegative thresholding; equals a conv -> ReLU pipeline."""
    x = np.asarray(x, dtype=float)
    codes = []
    for layer in model.layers:
        x = _plain_layer_step(layer, x, NONNEG)
        codes.append(x)
    return codes


RESCSC_VARIANTS = ("full", "resnet", "simplified", "plain")


@dataclass
class ResCSCModel:
    """Paired layers: the first of each pair takes a plain step, the second
    starts from the pair's input instead of zero."""

    layers: list[LayerParams]
    variant: str = "full"
    operator: str = NONNEG

    def __post_init__(self):
        if self.variant not in RESCSC_VARIANTS:
            raise ShapeError(f"unknown Res-CSC variant {self.variant!r}")
        if len(self.layers) % 2 != 0:
            raise ShapeError("Res-CSC needs an even number of layers")


def rescsc_forward(model, x):
    x = np.asarray(x, dtype=float)
    codes = []
    for first, second in zip(model.layers[0::2], model.layers[1::2]):
        pair_input = x
        x = _plain_layer_step(first, x, model.operator)
        codes.append(x)

        conv = second.kernel_bank
        if x.shape != conv.input_shape:
            raise ShapeError(
                f"pair's second layer input of shape {x.shape} does not match "
                f"dictionary input {conv.input_shape}"
            )
        scale = second.effective_scale()
        pre = scale * conv.adjoint_array(x)
        if model.variant != "plain":
            code_shape = (*conv.out_spatial, conv.width)
            if model.variant in ("full", "resnet"):
                if pair_input.shape != code_shape:
                    raise ShapeError(
                        f"residual input of shape {pair_input.shape} does not "
                        f"match the layer's code shape {code_shape}; the "
                        "addition requires shape-preserving layers"
                    )
                pre = pre + pair_input
            if model.variant in ("full", "simplified"):
                if pair_input.shape != code_shape:
                    raise ShapeError(
                        f"residual input of shape {pair_input.shape} does not "
                        f"match the layer's code shape {code_shape}"
                    )
                pre = pre - scale * conv.adjoint_array(conv.apply_array(pair_input))
        x = _activate(pre, second.bias, model.operator)
        codes.append(x)
    return codes


@dataclass
class MSDCSCModel:
    """Dense stack of MSD layers; channel count grows by w per layer."""

    layers: list[LayerParams]
    unfolding: int = 0
    solver: str = "ista"

    def __post_init__(self):
        if self.solver not in ("ista", "fista"):
            raise ShapeError(f"unknown solver {self.solver!r}")
        if self.unfolding < 0:
            raise ShapeError("unfolding must be >= 0")

    @property
    def depth(self):
        return len(self.layers)

    @property
    def width(self):
        return self.layers[0].kernel_bank.width if self.layers else 0


def msdcsc_layer_forward(layer, x, unfolding, solver="ista"):
    """One dense layer: thresholded step plus ``unfolding`` refinements.

    With c = 1/L and bias = -beta/L this is exactly ISTA (or FISTA) on the
    layer's Lasso problem with iterations = 1 + unfolding from a zero
    initialization.
    """
    x = np.asarray(x, dtype=float)
    conv = layer.kernel_bank
    if conv.padding != SAME:
        raise ShapeError("dense layers require same-zero padding")
    if x.shape != conv.input_shape:
        raise ShapeError(
            f"layer input of shape {x.shape} does not match dictionary input "
            f"{conv.input_shape}"
        )
    if solver not in ("ista", "fista"):
        raise ShapeError(f"unknown solver {solver!r}")
    c_in = conv.channels
    scale = layer.effective_scale(msd=True)
    bias_vec = np.concatenate(
        [np.full(c_in, layer.passthrough_bias), layer.bias]
    )

    def residual_stack(gamma):
        # D Gamma - X, the split / transposed-conv / subtract dataflow
        return gamma[..., :c_in] + conv.apply_array(gamma[..., c_in:]) - x

    def refine(point):
        f1 = residual_stack(point)
        f2 = conv.adjoint_array(f1)
        f3 = np.concatenate([f1, f2], axis=-1)
        return relu(point - scale * f3 + bias_vec)

    f1 = conv.adjoint_array(x)
    gamma = relu(scale * np.concatenate([x, f1], axis=-1) + bias_vec)

    if solver == "ista":
        for _ in range(unfolding):
            gamma = refine(gamma)
    else:
        prev = gamma
        t_k = 1.0
        for _ in range(unfolding):
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
            z = gamma + ((t_k - 1.0) / t_next) * (gamma - prev)
            prev = gamma
            gamma = refine(z)
            t_k = t_next
    return gamma


def msdcsc_forward(model, x, return_all=False):
    x = np.asarray(x, dtype=float)
    outputs = []
    for i, layer in enumerate(model.layers):
        conv = layer.kernel_bank
        if x.shape != conv.input_shape:
            raise ShapeError(
                f"layer {i}: input of shape {x.shape} does not match "
                f"dictionary input {conv.input_shape}"
            )
        x = msdcsc_layer_forward(layer, x, model.unfolding, model.solver)
        outputs.append(x)
    return outputs if return_all else x


# -- configuration / serialization -------------------------------------------


def _dilation_schedule(doc, depth):
    dilations = doc.get("dilations", "cycle")
    if dilations == "cycle":
        return [1 + (i % 3) for i in range(depth)]  # cycles 1, 2, 3
    if len(dilations) != depth:
        raise ShapeError("dilations list must have one entry per layer")
    return [int(s) for s in dilations]


def model_from_config(doc):
    """Build a seeded random model from a JSON-style config dict.

    Recognized keys: model (mlcsc | rescsc | msdcsc), input_shape, depth,
    width, kernel_size, dilations ("cycle" or list), unfolding, solver,
    variant, seed, bias (scalar, applied to every kernel).
    """
    kind = doc.get("model", "msdcsc")
    depth = int(doc["depth"])
    width = int(doc["width"])
    kernel_size = int(doc.get("kernel_size", 3))
    seed = int(doc.get("seed", 0))
    bias_value = float(doc.get("bias", 0.0))
    input_shape = tuple(int(d) for d in doc["input_shape"])
    dilations = _dilation_schedule(doc, depth)

    layers = []
    shape = input_shape
    for i in range(depth):
        if kind == "msdcsc":
            channels = input_shape[-1] + i * width
            shape = input_shape[:-1] + (channels,)
            padding = SAME
        else:
            padding = doc.get("padding", SAME)
        bank = random_dictionary(
            shape,
            (kernel_size,) * (len(input_shape) - 1),
            width,
            dilation=dilations[i],
            padding=padding,
            seed=seed + i,
        )
        layers.append(LayerParams(bank, bias=np.full(width, bias_value)))
        if kind != "msdcsc":
            shape = (*bank.out_spatial, width)

    if kind == "mlcsc":
        return MLCSCModel(layers)
    if kind == "rescsc":
        return ResCSCModel(
            layers,
            variant=doc.get("variant", "full"),
            operator=doc.get("operator", NONNEG),
        )
    if kind == "msdcsc":
        return MSDCSCModel(
            layers,
            unfolding=int(doc.get("unfolding", 0)),
            solver=doc.get("solver", "ista"),
        )
    raise ShapeError(f"unknown model kind {kind!r}")


def _layer_to_json(layer):
    return {
        "kernel_bank": layer.kernel_bank.to_json_dict(),
        "bias": layer.bias.tolist(),
        "scale": layer.scale,
        "passthrough_bias": layer.passthrough_bias,
    }


def _layer_from_json(doc):
    return LayerParams(
        ConvDictionary.from_json_dict(doc["kernel_bank"]),
        bias=np.asarray(doc["bias"], dtype=float),
        scale=doc.get("scale"),
        passthrough_bias=float(doc.get("passthrough_bias", 0.0)),
    )


def model_to_json(model):
    if not isinstance(model, (MLCSCModel, ResCSCModel, MSDCSCModel)):
        raise ShapeError(f"cannot serialize {type(model).__name__}")
    doc = {"layers": [_layer_to_json(l) for l in model.layers]}
    if isinstance(model, MLCSCModel):
        doc["model"] = "mlcsc"
    elif isinstance(model, ResCSCModel):
        doc.update(model="rescsc", variant=model.variant, operator=model.operator)
    elif isinstance(model, MSDCSCModel):
        doc.update(model="msdcsc", unfolding=model.unfolding, solver=model.solver)
    return doc


def model_from_json(doc):
    layers = [_layer_from_json(l) for l in doc["layers"]]
    kind = doc["model"]
    if kind == "mlcsc":
        return MLCSCModel(layers)
    if kind == "rescsc":
        return ResCSCModel(
            layers, variant=doc["variant"], operator=doc.get("operator", NONNEG)
        )
    if kind == "msdcsc":
        return MSDCSCModel(layers, unfolding=doc["unfolding"], solver=doc["solver"])
    raise ShapeError(f"unknown model kind {kind!r}")


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_json(model), fh, indent=2)


def load_model(path):
    with open(path) as fh:
        return model_from_json(json.load(fh))
