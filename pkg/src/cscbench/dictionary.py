"""(Dilated) convolutional dictionaries and the dense-connection variant.

A convolutional dictionary D is the transpose of a convolutional matrix:
its columns are dilated, shifted copies of the kernels. ``apply`` is the
reconstruction direction (D @ code, a transposed convolution) and
``apply_adjoint`` is the analysis direction (D.T @ signal, a plain
correlation of the signal with the kernels).

Conventions, fixed package-wide:
  * signals are arrays of shape (*spatial, channels); their flat form is
    row-major, so all channels of one position are contiguous
    (position-major layout);
  * codes are position-major too: flat index = position * width + kernel;
  * stride is 1; padding is "valid" (no padding) or "same" (zero padding,
    output grid equals input grid);
  * an MSD dictionary is [I | D_conv] with "same" padding so the identity
    block aligns with the signal. Its code is the block concatenation
    (identity slot | conv slot).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDictionaryError,
    MaterializationError,
    ShapeError,
)

MAX_DENSE_ENTRIES = 10_000_000

VALID = "valid"
SAME = "same"


@dataclass(frozen=True)
class ConvKernel:
    """One dilated kernel: taps of shape (*k_spatial, c_in), dilation s >= 1."""

    taps: np.ndarray
    dilation: int = 1

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim < 2:
            raise ShapeError("kernel taps need at least (k, c_in) dimensions")
        if min(taps.shape) < 1:
            raise ShapeError("kernel dimensions must all be >= 1")
        if self.dilation < 1:
            raise ShapeError("dilation must be a positive integer")
        if not np.all(np.isfinite(taps)):
            raise ShapeError("kernel taps must be finite")
        taps = taps.copy()
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)

    @property
    def spatial_shape(self):
        return self.taps.shape[:-1]

    @property
    def channels_in(self):
        return self.taps.shape[-1]

    @property
    def dilated_extent(self):
        return tuple(self.dilation * (k - 1) + 1 for k in self.spatial_shape)


class ConvDictionary:
    """A bank of kernels sharing shape and dilation over a fixed input grid."""

    def __init__(self, kernels, input_shape, padding=VALID):
        kernels = [
            k if isinstance(k, ConvKernel) else ConvKernel(np.asarray(k, float))
            for k in kernels
        ]
        if not kernels:
            raise ShapeError("a dictionary needs at least one kernel")
        ref = kernels[0]
        for k in kernels[1:]:
            if k.spatial_shape != ref.spatial_shape or k.channels_in != ref.channels_in:
                raise ShapeError("all kernels must share the same tap shape")
            if k.dilation != ref.dilation:
                raise ShapeError("all kernels must share the same dilation")
        input_shape = tuple(int(d) for d in input_shape)
        if len(input_shape) != len(ref.spatial_shape) + 1:
            raise ShapeError(
                f"input_shape {input_shape} does not match kernel rank "
                f"{len(ref.spatial_shape)} (+1 channel axis)"
            )
        if input_shape[-1] != ref.channels_in:
            raise ShapeError(
                f"input has {input_shape[-1]} channels but kernels expect "
                f"{ref.channels_in}"
            )
        if padding not in (VALID, SAME):
            raise ShapeError(f"unknown padding mode {padding!r}")
        if padding == VALID:
            for dim, ext in zip(input_shape, ref.dilated_extent):
                if ext > dim:
                    raise ShapeError(
                        "dilated kernel extent does not fit the input under "
                        "valid padding"
                    )
        self.kernels = tuple(kernels)
        self.input_shape = input_shape
        self.padding = padding

    # -- geometry -----------------------------------------------------------

    @property
    def width(self):
        return len(self.kernels)

    @property
    def dilation(self):
        return self.kernels[0].dilation

    @property
    def kernel_spatial(self):
        return self.kernels[0].spatial_shape

    @property
    def channels(self):
        return self.input_shape[-1]

    @property
    def spatial_shape(self):
        return self.input_shape[:-1]

    @property
    def dilated_extent(self):
        return self.kernels[0].dilated_extent

    @property
    def out_spatial(self):
        if self.padding == SAME:
            return self.spatial_shape
        return tuple(
            dim - ext + 1 for dim, ext in zip(self.spatial_shape, self.dilated_extent)
        )

    @property
    def pad_left(self):
        if self.padding == VALID:
            return tuple(0 for _ in self.spatial_shape)
        return tuple((ext - 1) // 2 for ext in self.dilated_extent)

    @property
    def pad_right(self):
        if self.padding == VALID:
            return tuple(0 for _ in self.spatial_shape)
        return tuple(
            ext - 1 - left for ext, left in zip(self.dilated_extent, self.pad_left)
        )

    @property
    def n_positions(self):
        return int(np.prod(self.out_spatial))

    @property
    def rows(self):
        return int(np.prod(self.input_shape))

    @property
    def cols(self):
        return self.n_positions * self.width

    @property
    def shape(self):
        return (self.rows, self.cols)

    def kernel_array(self):
        """Kernels stacked as an array of shape (width, *k_spatial, c_in)."""
        return np.stack([k.taps for k in self.kernels])

    def _kernel_matrix(self):
        return self.kernel_array().reshape(self.width, -1)

    def _tap_slices(self):
        s = self.dilation
        out = self.out_spatial
        for t in itertools.product(*(range(k) for k in self.kernel_spatial)):
            yield t, tuple(
                slice(t[d] * s, t[d] * s + out[d]) for d in range(len(out))
            )

    def _pad(self, x):
        if self.padding == VALID:
            return x
        pads = [(l, r) for l, r in zip(self.pad_left, self.pad_right)] + [(0, 0)]
        return np.pad(x, pads)

    # -- matrix-free application -------------------------------------------

    def adjoint_array(self, x):
        """D.T applied to a signal array (*spatial, c) -> code (*out, width)."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.input_shape:
            raise ShapeError(f"expected signal of shape {self.input_shape}, got {x.shape}")
        xp = self._pad(x)
        n_taps = int(np.prod(self.kernel_spatial))
        windows = np.empty((self.n_positions, n_taps, self.channels))
        for t_idx, (_, sl) in enumerate(self._tap_slices()):
            windows[:, t_idx, :] = xp[sl + (slice(None),)].reshape(-1, self.channels)
        code = windows.reshape(self.n_positions, -1) @ self._kernel_matrix().T
        return code.reshape(*self.out_spatial, self.width)

    def apply_array(self, code):
        """D applied to a code array (*out, width) -> signal (*spatial, c)."""
        code = np.asarray(code, dtype=float)
        expected = (*self.out_spatial, self.width)
        if code.shape != expected:
            raise ShapeError(f"expected code of shape {expected}, got {code.shape}")
        contrib = code.reshape(self.n_positions, self.width) @ self._kernel_matrix()
        contrib = contrib.reshape(self.n_positions, -1, self.channels)
        padded_shape = tuple(
            dim + l + r
            for dim, l, r in zip(self.spatial_shape, self.pad_left, self.pad_right)
        ) + (self.channels,)
        xp = np.zeros(padded_shape)
        for t_idx, (_, sl) in enumerate(self._tap_slices()):
            xp[sl + (slice(None),)] += contrib[:, t_idx, :].reshape(
                *self.out_spatial, self.channels
            )
        crop = tuple(
            slice(l, l + dim) for l, dim in zip(self.pad_left, self.spatial_shape)
        )
        return xp[crop + (slice(None),)]

    def apply(self, code):
        code = np.asarray(code, dtype=float)
        if code.shape != (self.cols,):
            raise ShapeError(f"expected code of length {self.cols}, got {code.shape}")
        return self.apply_array(code.reshape(*self.out_spatial, self.width)).ravel()

    def apply_adjoint(self, signal):
        signal = np.asarray(signal, dtype=float)
        if signal.shape != (self.rows,):
            raise ShapeError(
                f"expected signal of length {self.rows}, got {signal.shape}"
            )
        return self.adjoint_array(signal.reshape(self.input_shape)).ravel()

    # -- serialization -------------------------------------------------------

    def to_json_dict(self):
        return {
            "family": "conv",
            "kernels": [k.taps.tolist() for k in self.kernels],
            "dilation": self.dilation,
            "input_shape": list(self.input_shape),
            "padding": self.padding,
        }

    @classmethod
    def from_json_dict(cls, doc):
        kernels = [
            ConvKernel(np.asarray(taps, dtype=float), dilation=int(doc["dilation"]))
            for taps in doc["kernels"]
        ]
        return cls(kernels, tuple(doc["input_shape"]), doc.get("padding", VALID))


class MSDDictionary:
    """[I | D_conv]: dense-connection identity block next to a conv block."""

    def __init__(self, conv):
        if not isinstance(conv, ConvDictionary):
            raise ShapeError("MSDDictionary wraps a ConvDictionary")
        if conv.padding != SAME:
            raise ShapeError(
                "the identity block requires same-zero padding so the conv "
                "block preserves the signal dimension"
            )
        self.conv = conv

    @property
    def rows(self):
        return self.conv.rows

    @property
    def cols(self):
        return self.conv.rows + self.conv.cols

    @property
    def shape(self):
        return (self.rows, self.cols)

    def split_code(self, code):
        code = np.asarray(code, dtype=float)
        if code.shape != (self.cols,):
            raise ShapeError(f"expected code of length {self.cols}, got {code.shape}")
        return code[: self.rows], code[self.rows :]

    def apply(self, code):
        identity_part, conv_part = self.split_code(code)
        return identity_part + self.conv.apply(conv_part)

    def apply_adjoint(self, signal):
        signal = np.asarray(signal, dtype=float)
        if signal.shape != (self.rows,):
            raise ShapeError(
                f"expected signal of length {self.rows}, got {signal.shape}"
            )
        return np.concatenate([signal, self.conv.apply_adjoint(signal)])

    def to_json_dict(self):
        doc = self.conv.to_json_dict()
        doc["family"] = "msd"
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        return cls(ConvDictionary.from_json_dict(doc))


@dataclass(frozen=True)
class StripeLayout:
    """Position-major code layout: m channels per position, dilated extent n."""

    m: int
    n: int
    positions: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.positions < 1:
            raise ShapeError("stripe layout counts must be positive")

    @property
    def code_length(self):
        return self.positions * self.m


def layout_for(dictionary):
    """StripeLayout of a 1D convolutional dictionary's code."""
    conv = dictionary.conv if isinstance(dictionary, MSDDictionary) else dictionary
    if len(conv.spatial_shape) != 1:
        raise ShapeError("stripe layouts are defined for 1D dictionaries")
    return StripeLayout(
        m=conv.width, n=conv.dilated_extent[0], positions=conv.out_spatial[0]
    )


def dictionary_from_json(doc):
    if doc.get("family") == "msd":
        return MSDDictionary.from_json_dict(doc)
    return ConvDictionary.from_json_dict(doc)


def save_dictionary(dictionary, path):
    with open(path, "w") as fh:
        json.dump(dictionary.to_json_dict(), fh, indent=2)


def load_dictionary(path):
    with open(path) as fh:
        return dictionary_from_json(json.load(fh))


def export_matrix_csv(matrix, path):
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


# -- dense materialization ---------------------------------------------------


def _conv_to_matrix(conv):
    if conv.rows * conv.cols > MAX_DENSE_ENTRIES:
        raise MaterializationError(
            f"dense matrix would have {conv.rows * conv.cols} entries "
            f"(limit {MAX_DENSE_ENTRIES})"
        )
    mat = np.zeros((conv.rows, conv.cols))
    s = conv.dilation
    pad_left = conv.pad_left
    spatial = conv.spatial_shape
    taps = [k.taps for k in conv.kernels]
    for p_idx, p in enumerate(itertools.product(*(range(o) for o in conv.out_spatial))):
        for t in itertools.product(*(range(k) for k in conv.kernel_spatial)):
            coord = tuple(p[d] + t[d] * s - pad_left[d] for d in range(len(spatial)))
            if any(c < 0 or c >= spatial[d] for d, c in enumerate(coord)):
                continue  # zero padding: no matrix entry
            for c in range(conv.channels):
                row = int(np.ravel_multi_index(coord + (c,), conv.input_shape))
                for j in range(conv.width):
                    mat[row, p_idx * conv.width + j] += taps[j][t + (c,)]
    return mat


def to_matrix(dictionary):
    """Dense D with apply(dictionary, code) == D @ code."""
    if isinstance(dictionary, MSDDictionary):
        conv_block = _conv_to_matrix(dictionary.conv)
        return np.hstack([np.eye(dictionary.rows), conv_block])
    if isinstance(dictionary, ConvDictionary):
        return _conv_to_matrix(dictionary)
    raise ShapeError(f"cannot materialize {type(dictionary).__name__}")


def apply(dictionary, code):
    if isinstance(dictionary, np.ndarray):
        return dictionary @ np.asarray(code, dtype=float)
    return dictionary.apply(code)


def apply_adjoint(dictionary, signal):
    if isinstance(dictionary, np.ndarray):
        return dictionary.T @ np.asarray(signal, dtype=float)
    return dictionary.apply_adjoint(signal)


def operator_shape(dictionary):
    return tuple(dictionary.shape)


def mutual_coherence(dictionary):
    """max_{i != j} |<d_i, d_j>| over unit-normalized columns."""
    if isinstance(dictionary, np.ndarray):
        mat = np.asarray(dictionary, dtype=float)
    else:
        mat = to_matrix(dictionary)
    norms = np.linalg.norm(mat, axis=0)
    if np.any(norms == 0):
        raise DegenerateDictionaryError("dictionary has a zero column")
    normalized = mat / norms  # normalization on a copy only
    gram = np.abs(normalized.T @ normalized)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max()) if gram.size else 0.0


def stripe_sparsity(code, layout):
    """Max non-zero count over contiguous windows of 2n-1 positions."""
    code = np.asarray(code, dtype=float)
    if code.shape != (layout.code_length,):
        raise ShapeError(
            f"expected code of length {layout.code_length}, got {code.shape}"
        )
    per_position = np.count_nonzero(
        code.reshape(layout.positions, layout.m), axis=1
    )
    window = min(2 * layout.n - 1, layout.positions)
    sums = np.convolve(per_position, np.ones(window, dtype=int), mode="valid")
    return int(sums.max())


def project_to_kernel_grad(dense_grad, template):
    """Sum a dense-matrix gradient onto each tied kernel tap.

    Returns an array of shape (width, *k_spatial, c_in). For an MSD
    template the identity-block columns contribute nothing.
    """
    dense_grad = np.asarray(dense_grad, dtype=float)
    if isinstance(template, MSDDictionary):
        if dense_grad.shape != template.shape:
            raise ShapeError(
                f"expected gradient of shape {template.shape}, got {dense_grad.shape}"
            )
        return project_to_kernel_grad(dense_grad[:, template.rows :], template.conv)
    conv = template
    if dense_grad.shape != conv.shape:
        raise ShapeError(
            f"expected gradient of shape {conv.shape}, got {dense_grad.shape}"
        )
    grads = np.zeros((conv.width,) + conv.kernel_spatial + (conv.channels,))
    s = conv.dilation
    pad_left = conv.pad_left
    spatial = conv.spatial_shape
    for p_idx, p in enumerate(itertools.product(*(range(o) for o in conv.out_spatial))):
        for t in itertools.product(*(range(k) for k in conv.kernel_spatial)):
            coord = tuple(p[d] + t[d] * s - pad_left[d] for d in range(len(spatial)))
            if any(c < 0 or c >= spatial[d] for d, c in enumerate(coord)):
                continue
            for c in range(conv.channels):
                row = int(np.ravel_multi_index(coord + (c,), conv.input_shape))
                for j in range(conv.width):
                    grads[(j,) + t + (c,)] += dense_grad[row, p_idx * conv.width + j]
    return grads


def random_dictionary(
    input_shape,
    kernel_spatial,
    width,
    dilation=1,
    padding=VALID,
    seed=0,
    unit_norm=True,
):
    """Seeded Gaussian kernel bank, optionally normalized to unit tap norm."""
    rng = np.random.default_rng(seed)
    c_in = input_shape[-1]
    kernels = []
    for _ in range(width):
        taps = rng.standard_normal(tuple(kernel_spatial) + (c_in,))
        if unit_norm:
            taps = taps / np.linalg.norm(taps)
        kernels.append(ConvKernel(taps, dilation=dilation))
    return ConvDictionary(kernels, input_shape, padding)
