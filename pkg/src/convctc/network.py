"""Declarative layer stacks: configuration, parameter naming, composition.

A NetworkConfig lists conv / pool / dense / dropout stages in order, plus the
input geometry and alphabet size.  Building a Network resolves the geometry
(channel and band counts through the stack, the conv-to-dense flatten width)
and assigns every trainable tensor a stable dotted name -- the same ordering
checkpoints and optimizer state rely on.

The built network always ends with an implicit linear projection to the
alphabet ("output") followed by a per-frame log-softmax, so ``forward``
returns log-probabilities [A x f] ready for the ctc module.

Config files are JSON:

    {
      "input": {"channels": 3, "bands": 41},
      "alphabet_size": 62,
      "layers": [
        {"kind": "conv", "maps": 128, "filter_freq": 3, "filter_time": 5,
         "activation": "maxout", "freq_padding": "same"},
        {"kind": "pool", "size": 3, "step": 3},
        {"kind": "dropout", "rate": 0.3},
        {"kind": "dense", "width": 1024, "activation": "maxout"}
      ]
    }
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import layers
from .tensor import ShapeError


@dataclass
class ConvSpec:
    maps: int
    filter_freq: int
    filter_time: int
    activation: str = "maxout"      # maxout | relu | prelu
    freq_padding: str = "same"      # same | valid


@dataclass
class PoolSpec:
    size: int
    step: int


@dataclass
class DenseSpec:
    width: int
    activation: str = "maxout"      # maxout | relu | prelu | linear


@dataclass
class DropoutSpec:
    rate: float


@dataclass
class NetworkConfig:
    channels: int
    bands: int
    alphabet_size: int
    layers: list = field(default_factory=list)

    def to_json(self):
        entries = []
        for spec in self.layers:
            if isinstance(spec, ConvSpec):
                entries.append({"kind": "conv", "maps": spec.maps,
                                "filter_freq": spec.filter_freq,
                                "filter_time": spec.filter_time,
                                "activation": spec.activation,
                                "freq_padding": spec.freq_padding})
            elif isinstance(spec, PoolSpec):
                entries.append({"kind": "pool", "size": spec.size, "step": spec.step})
            elif isinstance(spec, DenseSpec):
                entries.append({"kind": "dense", "width": spec.width,
                                "activation": spec.activation})
            elif isinstance(spec, DropoutSpec):
                entries.append({"kind": "dropout", "rate": spec.rate})
            else:
                raise TypeError(f"unknown layer spec {spec!r}")
        return {"input": {"channels": self.channels, "bands": self.bands},
                "alphabet_size": self.alphabet_size, "layers": entries}

    @classmethod
    def from_json(cls, doc):
        try:
            channels = int(doc["input"]["channels"])
            bands = int(doc["input"]["bands"])
            alphabet_size = int(doc["alphabet_size"])
            entries = doc["layers"]
        except (KeyError, TypeError) as e:
            raise ValueError(f"config missing required field: {e}") from e
        specs = []
        for i, entry in enumerate(entries):
            kind = entry.get("kind")
            try:
                if kind == "conv":
                    specs.append(ConvSpec(int(entry["maps"]),
                                          int(entry["filter_freq"]),
                                          int(entry["filter_time"]),
                                          entry.get("activation", "maxout"),
                                          entry.get("freq_padding", "same")))
                elif kind == "pool":
                    specs.append(PoolSpec(int(entry["size"]), int(entry["step"])))
                elif kind == "dense":
                    specs.append(DenseSpec(int(entry["width"]),
                                           entry.get("activation", "maxout")))
                elif kind == "dropout":
                    specs.append(DropoutSpec(float(entry["rate"])))
                else:
                    raise ValueError(f"unknown layer kind {kind!r}")
            except KeyError as e:
                raise ValueError(f"config layer {i} ({kind}) missing field {e}") from e
        return cls(channels, bands, alphabet_size, specs)

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def figure3_config(dropout=0.3, dropout_scope="all"):
    """The shipped default stack: 10 conv 3x5 maxout (128 maps in the first
    four, 256 in the rest), 3x1 frequency pooling after layer 1, three
    1024-wide maxout dense layers, dropout after every hidden layer.

    dropout_scope narrows where dropout entries are emitted: "all", "conv",
    or "dense".
    """
    def drop(where):
        if dropout > 0 and dropout_scope in ("all", where):
            return [DropoutSpec(dropout)]
        return []

    specs = [ConvSpec(128, 3, 5), PoolSpec(3, 3), *drop("conv")]
    for _ in range(3):
        specs += [ConvSpec(128, 3, 5), *drop("conv")]
    for _ in range(6):
        specs += [ConvSpec(256, 3, 5), *drop("conv")]
    for _ in range(3):
        specs += [DenseSpec(1024), *drop("dense")]
    return NetworkConfig(channels=3, bands=41, alphabet_size=62, layers=specs)


# ---------------------------------------------------------------------------
# stages: thin wrappers pairing each spec with its params and backward route
# ---------------------------------------------------------------------------

class _ConvStage:
    def __init__(self, in_channels, spec):
        self.in_channels = in_channels
        self.spec = spec

    def param_specs(self):
        s = self.spec
        w = (s.maps, self.in_channels, s.filter_freq, s.filter_time)
        b = (s.maps,)
        if s.activation == "maxout":
            return [("w1", w, "weight"), ("b1", b, "bias"),
                    ("w2", w, "weight"), ("b2", b, "bias")]
        if s.activation == "prelu":
            return [("w", w, "weight"), ("b", b, "bias"), ("alpha", b, "alpha")]
        return [("w", w, "weight"), ("b", b, "bias")]

    def forward(self, x, p, train, rng):
        s = self.spec
        if s.activation == "maxout":
            w = np.concatenate([p["w1"], p["w2"]])
            b = np.concatenate([p["b1"], p["b2"]])
            h, conv_tape = layers.conv2d_forward(x, w, b, s.freq_padding)
            out, act_tape = layers.maxout2(h[:s.maps], h[s.maps:])
        else:
            h, conv_tape = layers.conv2d_forward(x, p["w"], p["b"], s.freq_padding)
            if s.activation == "prelu":
                out, act_tape = layers.prelu(h, p["alpha"])
            else:
                out, act_tape = layers.relu(h)
        return out, (conv_tape, act_tape)

    def backward(self, grad, tape, p):
        s = self.spec
        conv_tape, act_tape = tape
        if s.activation == "maxout":
            g1, g2 = layers.maxout2_backward(act_tape, grad)
            gx, gw, gb = layers.conv2d_backward(conv_tape, np.concatenate([g1, g2]))
            return gx, {"w1": gw[:s.maps], "b1": gb[:s.maps],
                        "w2": gw[s.maps:], "b2": gb[s.maps:]}
        if s.activation == "prelu":
            gh, galpha = layers.prelu_backward(act_tape, grad)
            gx, gw, gb = layers.conv2d_backward(conv_tape, gh)
            return gx, {"w": gw, "b": gb, "alpha": galpha}
        gh = layers.relu_backward(act_tape, grad)
        gx, gw, gb = layers.conv2d_backward(conv_tape, gh)
        return gx, {"w": gw, "b": gb}


class _PoolStage:
    def __init__(self, spec):
        self.spec = spec

    def param_specs(self):
        return []

    def forward(self, x, p, train, rng):
        return layers.maxpool_freq(x, self.spec.size, self.spec.step)

    def backward(self, grad, tape, p):
        return layers.maxpool_freq_backward(tape, grad), {}


class _DenseStage:
    def __init__(self, in_width, spec):
        self.in_width = in_width
        self.spec = spec

    def param_specs(self):
        s = self.spec
        w = (s.width, self.in_width)
        b = (s.width,)
        if s.activation == "maxout":
            return [("w1", w, "weight"), ("b1", b, "bias"),
                    ("w2", w, "weight"), ("b2", b, "bias")]
        if s.activation == "prelu":
            return [("w", w, "weight"), ("b", b, "bias"), ("alpha", b, "alpha")]
        return [("w", w, "weight"), ("b", b, "bias")]

    def forward(self, x, p, train, rng):
        s = self.spec
        if s.activation == "maxout":
            w = np.concatenate([p["w1"], p["w2"]])
            b = np.concatenate([p["b1"], p["b2"]])
            h, dense_tape = layers.dense_forward(x, w, b)
            out, act_tape = layers.maxout2(h[:s.width], h[s.width:])
        else:
            h, dense_tape = layers.dense_forward(x, p["w"], p["b"])
            if s.activation == "prelu":
                out, act_tape = layers.prelu(h, p["alpha"])
            elif s.activation == "relu":
                out, act_tape = layers.relu(h)
            else:
                out, act_tape = h, None
        return out, (dense_tape, act_tape)

    def backward(self, grad, tape, p):
        s = self.spec
        dense_tape, act_tape = tape
        if s.activation == "maxout":
            g1, g2 = layers.maxout2_backward(act_tape, grad)
            gx, gw, gb = layers.dense_backward(dense_tape, np.concatenate([g1, g2]))
            return gx, {"w1": gw[:s.width], "b1": gb[:s.width],
                        "w2": gw[s.width:], "b2": gb[s.width:]}
        if s.activation == "prelu":
            gh, galpha = layers.prelu_backward(act_tape, grad)
            gx, gw, gb = layers.dense_backward(dense_tape, gh)
            return gx, {"w": gw, "b": gb, "alpha": galpha}
        if s.activation == "relu":
            grad = layers.relu_backward(act_tape, grad)
        gx, gw, gb = layers.dense_backward(dense_tape, grad)
        return gx, {"w": gw, "b": gb}


class _DropoutStage:
    def __init__(self, spec):
        self.spec = spec

    def param_specs(self):
        return []

    def forward(self, x, p, train, rng):
        return layers.dropout(x, self.spec.rate, rng, training=train)

    def backward(self, grad, tape, p):
        return layers.dropout_backward(tape, grad), {}


class _FlattenStage:
    """[c x b x f] -> [c*b x f], map-major band-minor; checkpoints depend on
    this order."""

    def param_specs(self):
        return []

    def forward(self, x, p, train, rng):
        c, b, f = x.shape
        return x.reshape(c * b, f), (c, b)

    def backward(self, grad, tape, p):
        c, b = tape
        return grad.reshape(c, b, -1), {}


class _LogSoftmaxStage:
    def param_specs(self):
        return []

    def forward(self, x, p, train, rng):
        out = layers.log_softmax_frames(x)
        return out, out

    def backward(self, grad, tape, p):
        if grad.shape != tape.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match log-probs {tape.shape}")
        return layers.log_softmax_backward(tape, grad), {}


class Network:
    """A built layer stack with named parameters and hand-chained backprop."""

    def __init__(self, config):
        self.config = config
        if config.alphabet_size < 2:
            raise ValueError("alphabet_size must be at least 2 (blank plus one label)")
        self.stack = []          # (name, stage)
        counts = {}

        def push(kind, stage):
            counts[kind] = counts.get(kind, 0) + 1
            self.stack.append((f"{kind}{counts[kind]}", stage))

        channels, bands = config.channels, config.bands
        flat_width = None
        for i, spec in enumerate(config.layers):
            if isinstance(spec, ConvSpec):
                if flat_width is not None:
                    raise ValueError(f"layer {i}: conv cannot follow a dense layer")
                push("conv", _ConvStage(channels, spec))
                channels = spec.maps
                if spec.freq_padding == "valid":
                    bands = bands - spec.filter_freq + 1
                    if bands < 1:
                        raise ValueError(f"layer {i}: filter height {spec.filter_freq} "
                                         f"exceeds band count")
            elif isinstance(spec, PoolSpec):
                if flat_width is not None:
                    raise ValueError(f"layer {i}: pool cannot follow a dense layer")
                if bands < spec.size:
                    raise ValueError(f"layer {i}: pool size {spec.size} exceeds "
                                     f"{bands} bands")
                push("pool", _PoolStage(spec))
                bands = (bands - spec.size) // spec.step + 1
            elif isinstance(spec, DenseSpec):
                if flat_width is None:
                    flat_width = channels * bands
                    push("flatten", _FlattenStage())
                push("dense", _DenseStage(flat_width, spec))
                flat_width = spec.width
            elif isinstance(spec, DropoutSpec):
                push("dropout", _DropoutStage(spec))
            else:
                raise TypeError(f"unknown layer spec {spec!r}")

        if flat_width is None:
            flat_width = channels * bands
            push("flatten", _FlattenStage())
        self.stack.append(("output", _DenseStage(flat_width, DenseSpec(config.alphabet_size, "linear"))))
        self.stack.append(("softmax", _LogSoftmaxStage()))

        self.param_list = []     # (full name, shape, kind) in stack order
        for name, stage in self.stack:
            for local, shape, kind in stage.param_specs():
                self.param_list.append((f"{name}.{local}", shape, kind))

    def param_specs(self):
        return list(self.param_list)

    def _stage_params(self, name, stage, params):
        out = {}
        for local, shape, _ in stage.param_specs():
            full = f"{name}.{local}"
            if full not in params:
                raise KeyError(f"missing parameter {full}")
            if params[full].shape != shape:
                raise ShapeError(f"parameter {full} has shape {params[full].shape}, expected {shape}")
            out[local] = params[full]
        return out

    def forward(self, x, params, train=False, rng=None):
        """Run the stack on [channels x bands x f]; returns (log_probs [A x f], tapes)."""
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[:2] != (self.config.channels, self.config.bands):
            raise ShapeError(f"input shape {x.shape} does not match configured geometry "
                             f"({self.config.channels}, {self.config.bands}, f)")
        tapes = []
        h = x
        for i, (name, stage) in enumerate(self.stack):
            try:
                h, tape = stage.forward(h, self._stage_params(name, stage, params), train, rng)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({name}): {e}") from e
            tapes.append(tape)
        return h, tapes

    def backward(self, tapes, grad_log_probs):
        """Chain the stack's backward passes; returns grads for every parameter."""
        if len(tapes) != len(self.stack):
            raise ValueError(f"got {len(tapes)} tapes for {len(self.stack)} stages")
        grads = {}
        g = np.asarray(grad_log_probs)
        for i in range(len(self.stack) - 1, -1, -1):
            name, stage = self.stack[i]
            try:
                g, local = stage.backward(g, tapes[i], None)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({name}): {e}") from e
            for ln, gv in local.items():
                grads[f"{name}.{ln}"] = gv
        return {name: grads[name] for name, _, _ in self.param_list}
