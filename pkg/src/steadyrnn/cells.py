"""
Gated recurrent cells for SteadyRNN.

GRU and LSTM recurrences with exact analytic forward and backward passes
over a whole sequence. The hidden update is ``h_t = f(h_{t-1}, x_t; θ)``
with the gating conventions:

    GRU   z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
          r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
          ĥ_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
          h_t = (1 − z_t) ⊙ h_{t-1} + z_t ⊙ ĥ_t

    LSTM  f, i, o = σ(W x_t + U h_{t-1} + b) per gate,  g = tanh(...)
          c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
          h_t = o_t ⊙ tanh(c_t)

``z`` is the "new content" gate: ``z = 1`` replaces the state with the
candidate. Pinned by tests because the mirrored convention is also common.

All arrays may carry leading batch axes: inputs are ``(..., T, d)`` and
states ``(..., T, k)``. Batch reductions sum over the batch axes in index
order, so results never depend on thread count.

Example:
    >>> from steadyrnn.cells import CellParams, forward, backward
    >>> from steadyrnn.linalg import Rng
    >>> params = CellParams.init("gru", input_dim=2, hidden_dim=3, num_classes=2, rng=Rng(3))
    >>> traj = forward(params, Rng(4).normal((5, 2)))
    >>> traj.states.shape
    (5, 3)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from steadyrnn._util import DataError, ModelFormatError, ParameterError, ShapeError
from steadyrnn.linalg import Rng, matvec, sigmoid, tanh


GATES = {
    "gru": ("z", "r", "h"),
    "lstm": ("f", "i", "o", "g"),
}

MODEL_MAGIC = b"STEADYRNN-MODEL 1\n"


def block_shapes(kind, input_dim, hidden_dim, num_classes):
    """
    Ordered ``{name: shape}`` of every parameter block for a cell.

    Declaration order is W, U, b per gate, then the readout ``V`` and ``c``.
    Persistence and optimizer state both rely on this order.
    """
    if kind not in GATES:
        raise ParameterError("Unknown cell kind '{}'. Must be one of: {}".format(kind, sorted(GATES)))
    shapes = {}
    for gate in GATES[kind]:
        shapes["W_" + gate] = (hidden_dim, input_dim)
        shapes["U_" + gate] = (hidden_dim, hidden_dim)
        shapes["b_" + gate] = (hidden_dim,)
    shapes["V"] = (num_classes, hidden_dim)
    shapes["c"] = (num_classes,)
    return shapes


#############################################################################
#############################################################################

### PARAMETER CONTAINERS

@dataclass
class CellParams:
    """All learnable parameters of one gated cell plus its readout head.

    Attributes:
        kind: ``"gru"`` or ``"lstm"``.
        input_dim: Input width ``d``.
        hidden_dim: Hidden width ``k``.
        num_classes: Number of classes ``C`` of the readout.
        arrays: Parameter blocks keyed by name, in declaration order.
    """

    kind: str
    input_dim: int
    hidden_dim: int
    num_classes: int
    arrays: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if min(self.input_dim, self.hidden_dim) < 1 or self.num_classes < 2:
            raise ParameterError(
                "need input_dim, hidden_dim >= 1 and num_classes >= 2, got ({}, {}, {})".format(
                    self.input_dim, self.hidden_dim, self.num_classes)
            )
        shapes = self.shapes()
        if list(self.arrays) != list(shapes):
            raise ShapeError("parameter blocks {} do not match {} layout {}".format(
                list(self.arrays), self.kind, list(shapes)))
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError("block {} has shape {}, expected {}".format(name, arr.shape, shape))
            if not np.all(np.isfinite(arr)):
                raise DataError("block {} contains non-finite entries".format(name))
            self.arrays[name] = arr

    @classmethod
    def zeros(cls, kind, input_dim, hidden_dim, num_classes) -> CellParams:
        """All-zero parameters (the analytic test fixture)."""
        shapes = block_shapes(kind, input_dim, hidden_dim, num_classes)
        arrays = {name: np.zeros(shape) for name, shape in shapes.items()}
        return cls(kind, input_dim, hidden_dim, num_classes, arrays)

    @classmethod
    def init(cls, kind, input_dim, hidden_dim, num_classes, rng: Rng) -> CellParams:
        """
        Randomly initialized parameters.

        Weights are uniform in ±1/√k, biases zero, except LSTM forget-gate
        biases which start at 1.0. Each block draws from its own child stream
        of ``rng``.
        """
        shapes = block_shapes(kind, input_dim, hidden_dim, num_classes)
        bound = 1.0 / np.sqrt(hidden_dim)
        arrays = {}
        for index, (name, shape) in enumerate(shapes.items()):
            if name.startswith("b_") or name == "c":
                arrays[name] = np.zeros(shape)
            else:
                arrays[name] = rng.child(index).uniform(shape, -bound, bound)
        if kind == "lstm":
            arrays["b_f"] = np.ones(hidden_dim)
        return cls(kind, input_dim, hidden_dim, num_classes, arrays)

    def shapes(self):
        """Ordered ``{name: shape}`` for this cell's layout."""
        return block_shapes(self.kind, self.input_dim, self.hidden_dim, self.num_classes)

    def names(self):
        """Block names in declaration order."""
        return list(self.arrays)

    def __getitem__(self, name):
        return self.arrays[name]

    @property
    def num_parameters(self):
        """Total count of scalar parameters."""
        return int(sum(arr.size for arr in self.arrays.values()))

    def copy(self) -> CellParams:
        """Deep copy."""
        arrays = {name: arr.copy() for name, arr in self.arrays.items()}
        return CellParams(self.kind, self.input_dim, self.hidden_dim, self.num_classes, arrays)

    def with_arrays(self, arrays) -> CellParams:
        """Same layout, new blocks."""
        return CellParams(self.kind, self.input_dim, self.hidden_dim, self.num_classes, dict(arrays))

    def equals(self, other: CellParams) -> bool:
        """Bitwise equality of layout and every block."""
        return (
            self.kind == other.kind
            and self.names() == other.names()
            and all(np.array_equal(self.arrays[n], other.arrays[n]) for n in self.names())
        )

    #--- Persistence ---

    def save(self, filename, norm_mean=None, norm_std=None):
        """
        Write the model to a self-describing binary file.

        Layout: the magic line, one JSON header line (kind, dims, block
        names and shapes, normalization flag), then every block as
        little-endian float64 in declaration order, then the normalization
        mean and std blocks when given.

        Args:
            filename: Destination path.
            norm_mean: Optional per-feature mean the model was trained with.
            norm_std: Optional per-feature std the model was trained with.
        """
        has_norm = norm_mean is not None and norm_std is not None
        header = {
            "cell": self.kind,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "num_classes": self.num_classes,
            "blocks": [[name, list(arr.shape)] for name, arr in self.arrays.items()],
            "normalization": has_norm,
            "dtype": "<f8",
        }
        parts = [MODEL_MAGIC, (json.dumps(header, sort_keys=True, separators=(',', ':')) + "\n").encode("utf-8")]
        for arr in self.arrays.values():
            parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if has_norm:
            for arr in (norm_mean, norm_std):
                vec = np.asarray(arr, dtype="<f8")
                if vec.shape != (self.input_dim,):
                    raise ShapeError("normalization vector has shape {}, expected ({},)".format(
                        vec.shape, self.input_dim))
                parts.append(vec.tobytes())
        with open(filename, "wb") as f:
            f.write(b"".join(parts))

    @classmethod
    def load(cls, filename) -> SavedModel:
        """
        Read a model written by :meth:`save`.

        Returns:
            SavedModel with the parameters and optional normalization stats.

        Raises:
            ModelFormatError: When the file is not a valid model container.
        """
        with open(filename, "rb") as f:
            raw = f.read()
        if not raw.startswith(MODEL_MAGIC):
            raise ModelFormatError("{} is not a steadyrnn model file".format(filename))
        rest = raw[len(MODEL_MAGIC):]
        newline = rest.find(b"\n")
        if newline < 0:
            raise ModelFormatError("model header is truncated")
        try:
            header = json.loads(rest[:newline].decode("utf-8"))
            kind = header["cell"]
            dims = (int(header["input_dim"]), int(header["hidden_dim"]), int(header["num_classes"]))
            blocks = [(name, tuple(shape)) for name, shape in header["blocks"]]
        except (ValueError, KeyError, TypeError) as e:
            raise ModelFormatError("model header is malformed: {}".format(e)) from e
        expected = block_shapes(kind, *dims)
        if [name for name, _ in blocks] != list(expected) or any(expected[n] != s for n, s in blocks):
            raise ModelFormatError("model header blocks do not match a {} layout".format(kind))
        body = rest[newline + 1:]
        arrays = {}
        offset = 0
        for name, shape in blocks:
            count = int(np.prod(shape))
            nbytes = 8 * count
            if offset + nbytes > len(body):
                raise ModelFormatError("model body is truncated at block {}".format(name))
            arrays[name] = np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
            offset += nbytes
        norm_mean = norm_std = None
        if header.get("normalization"):
            d = dims[0]
            if offset + 16 * d != len(body):
                raise ModelFormatError("normalization blocks are truncated")
            norm_mean = np.frombuffer(body, dtype="<f8", count=d, offset=offset).astype(np.float64)
            norm_std = np.frombuffer(body, dtype="<f8", count=d, offset=offset + 8 * d).astype(np.float64)
        elif offset != len(body):
            raise ModelFormatError("model body has {} trailing bytes".format(len(body) - offset))
        params = cls(kind, dims[0], dims[1], dims[2], arrays)
        return SavedModel(params=params, norm_mean=norm_mean, norm_std=norm_std)


@dataclass
class SavedModel:
    """A decoded model file."""

    params: CellParams
    norm_mean: Optional[NDArray[np.float64]] = None
    norm_std: Optional[NDArray[np.float64]] = None


@dataclass
class ParamGrads:
    """One gradient block per parameter block, same names and shapes."""

    arrays: dict[str, NDArray[np.float64]]

    @classmethod
    def zeros_like(cls, params: CellParams) -> ParamGrads:
        return cls({name: np.zeros_like(arr) for name, arr in params.arrays.items()})

    def __getitem__(self, name):
        return self.arrays[name]

    def check_congruent(self, params: CellParams) -> None:
        """Raise ShapeError unless names and shapes match ``params``."""
        if list(self.arrays) != params.names():
            raise ShapeError("gradient blocks {} do not match parameter blocks {}".format(
                list(self.arrays), params.names()))
        for name, arr in params.arrays.items():
            if self.arrays[name].shape != arr.shape:
                raise ShapeError("gradient block {} has shape {}, expected {}".format(
                    name, self.arrays[name].shape, arr.shape))

    def global_norm(self) -> float:
        """Euclidean norm over every coordinate."""
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays.values())))

    def scaled(self, factor) -> ParamGrads:
        return ParamGrads({name: g * factor for name, g in self.arrays.items()})

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(g))) for g in self.arrays.values())


#############################################################################
#############################################################################

### TRAJECTORY

@dataclass
class HiddenTrajectory:
    """Hidden states of one forward pass, with the cache backward needs.

    Attributes:
        kind: Cell kind that produced the trajectory.
        inputs: The inputs, shape ``(..., T, d)``.
        h0: Initial hidden state, shape ``(..., k)``.
        states: ``h_1..h_T``, shape ``(..., T, k)``.
        c0: LSTM initial cell state (None for GRU).
        cells: LSTM cell states ``c_1..c_T`` (None for GRU).
        gates: Cached gate activations per step, each ``(..., T, k)``.
    """

    kind: str
    inputs: NDArray[np.float64]
    h0: NDArray[np.float64]
    states: NDArray[np.float64]
    c0: Optional[NDArray[np.float64]] = None
    cells: Optional[NDArray[np.float64]] = None
    gates: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    @property
    def length(self) -> int:
        """Number of time steps T."""
        return int(self.states.shape[-2])

    @property
    def final(self) -> NDArray[np.float64]:
        """``h_T``, shape ``(..., k)``."""
        return self.states[..., -1, :]

    def previous_states(self) -> NDArray[np.float64]:
        """``h_0..h_{T-1}``, aligned with ``states``."""
        return np.concatenate([self.h0[..., None, :], self.states[..., :-1, :]], axis=-2)


def _check_inputs(params: CellParams, inputs: ArrayLike) -> NDArray[np.float64]:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError("inputs must have shape (..., T, d), got {}".format(x.shape))
    if x.shape[-1] != params.input_dim:
        raise ShapeError("inputs have width {}, cell expects input_dim {}".format(x.shape[-1], params.input_dim))
    if x.shape[-2] < 1:
        raise ShapeError("inputs need at least one time step")
    if not np.all(np.isfinite(x)):
        raise DataError("inputs contain non-finite entries")
    return x


def _initial_state(state, batch_shape, k, name) -> NDArray[np.float64]:
    if state is None:
        return np.zeros(batch_shape + (k,))
    arr = np.asarray(state, dtype=np.float64)
    arr = np.broadcast_to(arr, batch_shape + (k,)) if arr.shape == (k,) else arr
    if arr.shape != batch_shape + (k,):
        raise ShapeError("{} has shape {}, expected {}".format(name, arr.shape, batch_shape + (k,)))
    if not np.all(np.isfinite(arr)):
        raise DataError("{} contains non-finite entries".format(name))
    return np.array(arr, dtype=np.float64)


#############################################################################
#############################################################################

### FORWARD

def forward(params: CellParams, inputs: ArrayLike, h0: Optional[ArrayLike] = None,
            c0: Optional[ArrayLike] = None) -> HiddenTrajectory:
    """
    Run the recurrence over every time step.

    Args:
        params: Cell parameters.
        inputs: Array of shape ``(..., T, d)``.
        h0: Initial hidden state ``(..., k)`` or ``(k,)``; zeros by default.
        c0: LSTM initial cell state; zeros by default. Ignored by GRU.

    Returns:
        HiddenTrajectory with every gate value cached.

    Raises:
        ShapeError: On any dimension mismatch.
        DataError: On non-finite inputs or initial states.
    """
    x = _check_inputs(params, inputs)
    batch_shape = x.shape[:-2]
    k = params.hidden_dim
    h_init = _initial_state(h0, batch_shape, k, "h0")
    if params.kind == "gru":
        return _forward_gru(params, x, h_init)
    c_init = _initial_state(c0, batch_shape, k, "c0")
    return _forward_lstm(params, x, h_init, c_init)


def _forward_gru(params, x, h0):
    p = params.arrays
    T = x.shape[-2]
    # input projections for every step at once: (..., T, k)
    xz = matvec(p["W_z"], x) + p["b_z"]
    xr = matvec(p["W_r"], x) + p["b_r"]
    xh = matvec(p["W_h"], x) + p["b_h"]
    out_shape = x.shape[:-1] + (params.hidden_dim,)
    states = np.empty(out_shape)
    zs, rs, hs = np.empty(out_shape), np.empty(out_shape), np.empty(out_shape)
    h = h0
    for t in range(T):
        z = sigmoid(xz[..., t, :] + matvec(p["U_z"], h))
        r = sigmoid(xr[..., t, :] + matvec(p["U_r"], h))
        cand = tanh(xh[..., t, :] + matvec(p["U_h"], r * h))
        h = (1.0 - z) * h + z * cand
        states[..., t, :] = h
        zs[..., t, :], rs[..., t, :], hs[..., t, :] = z, r, cand
    return HiddenTrajectory("gru", x, h0, states, gates={"z": zs, "r": rs, "h": hs})


def _forward_lstm(params, x, h0, c0):
    p = params.arrays
    T = x.shape[-2]
    proj = {g: matvec(p["W_" + g], x) + p["b_" + g] for g in GATES["lstm"]}
    out_shape = x.shape[:-1] + (params.hidden_dim,)
    states, cells = np.empty(out_shape), np.empty(out_shape)
    cache = {g: np.empty(out_shape) for g in GATES["lstm"]}
    cache["tanh_c"] = np.empty(out_shape)
    h, c = h0, c0
    for t in range(T):
        f = sigmoid(proj["f"][..., t, :] + matvec(p["U_f"], h))
        i = sigmoid(proj["i"][..., t, :] + matvec(p["U_i"], h))
        o = sigmoid(proj["o"][..., t, :] + matvec(p["U_o"], h))
        g = tanh(proj["g"][..., t, :] + matvec(p["U_g"], h))
        c = f * c + i * g
        tc = tanh(c)
        h = o * tc
        states[..., t, :], cells[..., t, :] = h, c
        for name, value in (("f", f), ("i", i), ("o", o), ("g", g), ("tanh_c", tc)):
            cache[name][..., t, :] = value
    return HiddenTrajectory("lstm", x, h0, states, c0=c0, cells=cells, gates=cache)


def readout(params: CellParams, h: ArrayLike) -> NDArray[np.float64]:
    """Class logits ``V·h + c`` for a hidden state of shape ``(..., k)``."""
    return matvec(params.arrays["V"], h) + params.arrays["c"]


#############################################################################
#############################################################################

### BACKWARD

def _outer_sum(a, b):
    """Σ over batch and time of ``a ⊗ b``; a is ``(..., T, m)``, b is ``(..., T, n)``."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _bias_sum(a):
    return a.reshape(-1, a.shape[-1]).sum(axis=0)


def backward(params: CellParams, trajectory: HiddenTrajectory,
             dL_dh: ArrayLike) -> tuple[ParamGrads, NDArray[np.float64]]:
    """
    Backpropagation through time with per-step gradient injection.

    ``dL_dh[..., t, :]`` is the gradient of the loss with respect to ``h_t``
    taken with the trajectory held fixed; backward chains those injections
    through the recurrence. A classification loss injects at the last step
    only, the consistency loss at every step.

    Args:
        params: The parameters the trajectory was produced with.
        trajectory: Output of :func:`forward` (carries the inputs).
        dL_dh: Upstream gradients, same shape as ``trajectory.states``.

    Returns:
        ``(grads, dL_dh0)``. Readout blocks ``V`` and ``c`` are zero here;
        the objective fills them in.

    Raises:
        ShapeError: When ``dL_dh`` does not match the trajectory.
    """
    upstream = np.asarray(dL_dh, dtype=np.float64)
    if upstream.shape != trajectory.states.shape:
        raise ShapeError("dL_dh has shape {}, trajectory states have shape {}".format(
            upstream.shape, trajectory.states.shape))
    if trajectory.kind != params.kind:
        raise ShapeError("trajectory is {} but params are {}".format(trajectory.kind, params.kind))
    if trajectory.inputs.shape[-1] != params.input_dim or trajectory.states.shape[-1] != params.hidden_dim:
        raise ShapeError("trajectory dims ({}, {}) do not match params ({}, {})".format(
            trajectory.inputs.shape[-1], trajectory.states.shape[-1], params.input_dim, params.hidden_dim))
    if params.kind == "gru":
        return _backward_gru(params, trajectory, upstream)
    return _backward_lstm(params, trajectory, upstream)


def _backward_gru(params, traj, upstream):
    p = params.arrays
    x = traj.inputs
    z, r, cand = traj.gates["z"], traj.gates["r"], traj.gates["h"]
    h_prev_all = traj.previous_states()
    T = traj.length
    da = {g: np.empty_like(traj.states) for g in GATES["gru"]}
    dh_next = np.zeros_like(traj.h0)
    for t in range(T - 1, -1, -1):
        h_prev = h_prev_all[..., t, :]
        zt, rt, ct = z[..., t, :], r[..., t, :], cand[..., t, :]
        dh = upstream[..., t, :] + dh_next
        da_h = dh * zt * (1.0 - ct * ct)
        d_rh = da_h @ p["U_h"]
        da_r = d_rh * h_prev * rt * (1.0 - rt)
        da_z = dh * (ct - h_prev) * zt * (1.0 - zt)
        dh_next = (dh * (1.0 - zt) + d_rh * rt
                   + da_r @ p["U_r"] + da_z @ p["U_z"])
        da["z"][..., t, :], da["r"][..., t, :], da["h"][..., t, :] = da_z, da_r, da_h
    grads = ParamGrads.zeros_like(params)
    recurrent_in = {"z": h_prev_all, "r": h_prev_all, "h": r * h_prev_all}
    for g in GATES["gru"]:
        grads.arrays["W_" + g] = _outer_sum(da[g], x)
        grads.arrays["U_" + g] = _outer_sum(da[g], recurrent_in[g])
        grads.arrays["b_" + g] = _bias_sum(da[g])
    return grads, dh_next


def _backward_lstm(params, traj, upstream):
    p = params.arrays
    x = traj.inputs
    f, i, o, g_act, tc = (traj.gates[n] for n in ("f", "i", "o", "g", "tanh_c"))
    h_prev_all = traj.previous_states()
    c_prev_all = np.concatenate([traj.c0[..., None, :], traj.cells[..., :-1, :]], axis=-2)
    T = traj.length
    da = {g: np.empty_like(traj.states) for g in GATES["lstm"]}
    dh_next = np.zeros_like(traj.h0)
    dc_next = np.zeros_like(traj.h0)
    for t in range(T - 1, -1, -1):
        ft, it, ot, gt, tct = f[..., t, :], i[..., t, :], o[..., t, :], g_act[..., t, :], tc[..., t, :]
        dh = upstream[..., t, :] + dh_next
        dc = dc_next + dh * ot * (1.0 - tct * tct)
        da_f = dc * c_prev_all[..., t, :] * ft * (1.0 - ft)
        da_i = dc * gt * it * (1.0 - it)
        da_o = dh * tct * ot * (1.0 - ot)
        da_g = dc * it * (1.0 - gt * gt)
        dc_next = dc * ft
        dh_next = da_f @ p["U_f"] + da_i @ p["U_i"] + da_o @ p["U_o"] + da_g @ p["U_g"]
        for name, value in (("f", da_f), ("i", da_i), ("o", da_o), ("g", da_g)):
            da[name][..., t, :] = value
    grads = ParamGrads.zeros_like(params)
    for g in GATES["lstm"]:
        grads.arrays["W_" + g] = _outer_sum(da[g], x)
        grads.arrays["U_" + g] = _outer_sum(da[g], h_prev_all)
        grads.arrays["b_" + g] = _bias_sum(da[g])
    return grads, dh_next
