"""A small layered network with hand-written reverse-mode gradients.

Networks are a fixed sequence of layers acting on a batch axis. Parameters
live in one flat float64 vector; each layer owns a contiguous slice of it
(Dense: row-major W then bias, Conv2d: W[out][in][k][k] then bias).

``forward`` records a tape of per-layer caches and ``backward`` walks it in
reverse, returning gradients for both the input and the flat parameter
vector. This is all the autodiff the package needs: recovery differentiates
with respect to the latent input and training with respect to the weights.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeMismatch
from .rng import SplitMix64

# --- layers ----------------------------------------------------------------


class Layer:
    tag = 0

    def param_count(self, in_shape):
        return 0

    def out_shape(self, in_shape):
        return in_shape

    def init_params(self, in_shape, rng, std):
        return np.zeros(0)

    def forward(self, w, x):
        raise NotImplementedError

    def backward(self, w, cache, gout, need_params=True):
        raise NotImplementedError

    def header(self):
        return ()


@dataclass
class Dense(Layer):
    """Fully connected layer; flattens its per-sample input."""

    n_in: int
    n_out: int
    tag = 1

    def param_count(self, in_shape):
        return self.n_out * self.n_in + self.n_out

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.n_in:
            raise ShapeMismatch(f"Dense expects {self.n_in} inputs, got {in_shape}")
        return (self.n_out,)

    def init_params(self, in_shape, rng, std):
        w = rng.normal(self.n_out * self.n_in) * std
        return np.concatenate([w, np.zeros(self.n_out)])

    def _split(self, w):
        k = self.n_out * self.n_in
        return w[:k].reshape(self.n_out, self.n_in), w[k:]

    def forward(self, w, x):
        W, b = self._split(w)
        flat = x.reshape(len(x), -1)
        return flat @ W.T + b, (x.shape, flat)

    def backward(self, w, cache, gout, need_params=True):
        W, _ = self._split(w)
        in_shape, flat = cache
        gw = np.zeros(0)
        if need_params:
            gw = np.concatenate([(gout.T @ flat).reshape(-1), gout.sum(axis=0)])
        return (gout @ W).reshape(in_shape), gw

    def header(self):
        return (self.n_in, self.n_out)


@dataclass
class Reshape(Layer):
    c: int
    h: int
    w: int
    tag = 2

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.c * self.h * self.w:
            raise ShapeMismatch(f"cannot reshape {in_shape} to {(self.c, self.h, self.w)}")
        return (self.c, self.h, self.w)

    def forward(self, w, x):
        return x.reshape(len(x), self.c, self.h, self.w), x.shape

    def backward(self, w, cache, gout, need_params=True):
        return gout.reshape(cache), np.zeros(0)

    def header(self):
        return (self.c, self.h, self.w)


@dataclass
class UpsampleNearest(Layer):
    factor: int
    tag = 3

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"UpsampleNearest needs (c, h, w) input, got {in_shape}")
        c, h, w = in_shape
        return (c, h * self.factor, w * self.factor)

    def forward(self, w, x):
        f = self.factor
        return x.repeat(f, axis=2).repeat(f, axis=3), None

    def backward(self, w, cache, gout, need_params=True):
        f = self.factor
        g = 0.0
        for i in range(f):
            for j in range(f):
                g = g + gout[:, :, i::f, j::f]
        return g, np.zeros(0)

    def header(self):
        return (self.factor,)


@dataclass
class Conv2d(Layer):
    """2-D cross-correlation with zero padding."""

    in_ch: int
    out_ch: int
    k: int
    stride: int = 1
    pad: int = 0
    tag = 4

    def param_count(self, in_shape):
        return self.out_ch * self.in_ch * self.k * self.k + self.out_ch

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_ch:
            raise ShapeMismatch(f"Conv2d expects ({self.in_ch}, h, w), got {in_shape}")
        _, h, w = in_shape
        ho = (h + 2 * self.pad - self.k) // self.stride + 1
        wo = (w + 2 * self.pad - self.k) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatch("Conv2d kernel larger than padded input")
        return (self.out_ch, ho, wo)

    def init_params(self, in_shape, rng, std):
        w = rng.normal(self.out_ch * self.in_ch * self.k * self.k) * std
        return np.concatenate([w, np.zeros(self.out_ch)])

    def _split(self, w):
        nk = self.out_ch * self.in_ch * self.k * self.k
        return w[:nk].reshape(self.out_ch, -1), w[nk:]

    def _geometry(self, x):
        _, _, h, w = x.shape
        ho = (h + 2 * self.pad - self.k) // self.stride + 1
        wo = (w + 2 * self.pad - self.k) // self.stride + 1
        return ho, wo

    def forward(self, w, x):
        W, b = self._split(w)
        B, C, h, wd = x.shape
        ho, wo = self._geometry(x)
        # channel-major (C, B, h, w) so the product is a single GEMM
        xt = x.transpose(1, 0, 2, 3)
        cols = _im2col(xt, self.k, self.stride, self.pad, ho, wo)
        out = W @ cols
        out += b[:, None]
        out = out.reshape(self.out_ch, B, ho, wo).transpose(1, 0, 2, 3)
        return np.ascontiguousarray(out), (x.shape, cols)

    def backward(self, w, cache, gout, need_params=True):
        W, _ = self._split(w)
        (B, C, h, wd), cols = cache
        k, s, p = self.k, self.stride, self.pad
        ho, wo = gout.shape[2:]
        gt = gout.transpose(1, 0, 2, 3)
        g = gt.reshape(self.out_ch, B * ho * wo)
        gp = np.zeros(0)
        if need_params:
            gp = np.concatenate([(g @ cols.T).reshape(-1), g.sum(axis=1)])
        if s == 1 and p <= k - 1:
            # input gradient of a stride-1 correlation is a full correlation
            # of the output gradient with the flipped, channel-swapped kernel
            Wf = W.reshape(self.out_ch, C, k, k)[:, :, ::-1, ::-1]
            Wf = Wf.transpose(1, 0, 2, 3).reshape(C, -1)
            gcols = _im2col(gt, k, 1, k - 1 - p, h, wd)
            gx = (Wf @ gcols).reshape(C, B, h, wd)
        else:
            gcols = W.T * g if self.out_ch == 1 else W.T @ g
            gcols = gcols.reshape(C, k, k, B, ho, wo)
            gxp = np.zeros((C, B, h + 2 * p, wd + 2 * p))
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += gcols[:, i, j]
            gx = gxp[:, :, p:p + h, p:p + wd]
        return np.ascontiguousarray(gx.transpose(1, 0, 2, 3)), gp

    def header(self):
        return (self.in_ch, self.out_ch, self.k, self.stride, self.pad)


@dataclass
class ReLU(Layer):
    tag = 5

    def forward(self, w, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, w, cache, gout, need_params=True):
        return gout * cache, np.zeros(0)


@dataclass
class Tanh(Layer):
    tag = 6

    def forward(self, w, x):
        t = np.tanh(x)
        return t, t

    def backward(self, w, cache, gout, need_params=True):
        return gout * (1.0 - cache * cache), np.zeros(0)


@dataclass
class Identity(Layer):
    """Pass-through; used to build linear test generators."""

    tag = 7

    def forward(self, w, x):
        return x, None

    def backward(self, w, cache, gout, need_params=True):
        return gout, np.zeros(0)


def _im2col(xt, k, s, p, ho, wo):
    """Columns of a channel-major (C, B, h, w) tensor: shape (C*k*k, B*ho*wo)."""
    C, B = xt.shape[:2]
    if p:
        xt = np.pad(xt, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((C, k, k, B, ho, wo))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xt[:, :, i:i + s * ho:s, j:j + s * wo:s]
    return cols.reshape(C * k * k, B * ho * wo)


LAYER_TYPES = {cls.tag: cls for cls in (Dense, Reshape, UpsampleNearest, Conv2d,
                                        ReLU, Tanh, Identity)}
_HEADER_LEN = {1: 2, 2: 3, 3: 1, 4: 5, 5: 0, 6: 0, 7: 0}


# --- networks ---------------------------------------------------------------


@dataclass(eq=False)
class Net:
    """Sequential network over per-sample tensors of ``input_shape``."""

    input_shape: tuple
    layers: list
    weights: np.ndarray = None
    offsets: list = field(init=False, repr=False)
    shapes: list = field(init=False, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        shape = self.input_shape
        self.shapes = [shape]
        self.offsets = [0]
        for layer in self.layers:
            self.offsets.append(self.offsets[-1] + layer.param_count(shape))
            shape = layer.out_shape(shape)
            self.shapes.append(shape)
        if self.weights is None:
            self.weights = np.zeros(self.num_params)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.num_params,):
            raise ShapeMismatch(
                f"weight vector has {self.weights.size} entries, net needs {self.num_params}")

    @property
    def num_params(self) -> int:
        return self.offsets[-1]

    @property
    def output_shape(self):
        return self.shapes[-1]

    def layer_params(self, i, weights=None):
        w = self.weights if weights is None else weights
        return w[self.offsets[i]:self.offsets[i + 1]]

    def init_weights(self, seed: int, std: float = 0.02) -> "Net":
        """N(0, std^2) weights and zero biases, drawn layer by layer."""
        rng = SplitMix64(seed)
        chunks = [layer.init_params(shape, rng, std)
                  for layer, shape in zip(self.layers, self.shapes)]
        self.weights = np.concatenate([np.zeros(0)] + chunks)
        return self

    def with_weights(self, weights) -> "Net":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone.weights = np.asarray(weights, dtype=np.float64).copy()
        return clone

    def forward(self, x, weights=None):
        """Run a batch through the net; returns (output, tape)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"input {x.shape[1:]} != {self.input_shape}")
        tape = []
        for i, layer in enumerate(self.layers):
            x, cache = layer.forward(self.layer_params(i, weights), x)
            tape.append(cache)
        return x, tape

    def backward(self, tape, gout, weights=None, need_params=True):
        """Pull ``gout`` back through the tape; returns (g_input, g_weights)."""
        g = np.asarray(gout, dtype=np.float64)
        gw = np.zeros(self.num_params) if need_params else None
        for i in range(len(self.layers) - 1, -1, -1):
            g, gp = self.layers[i].backward(self.layer_params(i, weights), tape[i], g,
                                            need_params)
            if need_params and gp.size:
                gw[self.offsets[i]:self.offsets[i + 1]] = gp
        return g, gw


@dataclass(eq=False)
class GeneratorNet(Net):
    """Patch generator G: [0,1]^d -> tau_out x tau_out patch.

    When the last layer is Tanh its output is remapped to intensities by
    (g + 1) / 2. Nets ending in any other layer (test-only linear generators)
    are returned raw.
    """

    tau_out: int = 0

    def __post_init__(self):
        super().__post_init__()
        if len(self.input_shape) != 1:
            raise ShapeMismatch("generator input must be a latent vector")
        if int(np.prod(self.output_shape)) != self.tau_out ** 2:
            raise ShapeMismatch(
                f"generator emits {self.output_shape}, expected {self.tau_out}^2 values")

    @property
    def latent_dim(self) -> int:
        return self.input_shape[0]

    @property
    def remapped(self) -> bool:
        return bool(self.layers) and isinstance(self.layers[-1], Tanh)

    @property
    def n(self) -> int:
        return self.tau_out ** 2

    def run(self, z, weights=None):
        """Batched generation; returns (patches of shape (B, n), tape)."""
        out, tape = self.forward(z, weights)
        out = out.reshape(len(out), -1)
        if self.remapped:
            out = 0.5 * (out + 1.0)
        return out, tape

    def pullback(self, tape, upstream, weights=None, need_params=True):
        """Gradients of <upstream, G(z)> w.r.t. latent batch and weights."""
        g = np.asarray(upstream, dtype=np.float64)
        if self.remapped:
            g = 0.5 * g
        g = g.reshape((len(g),) + tuple(self.output_shape))
        return self.backward(tape, g, weights, need_params)


def _batch(z, d):
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    z = z.reshape(1, -1) if single else z
    if z.shape[1] != d:
        raise ShapeMismatch(f"latent length {z.shape[1]} != {d}")
    return z, single


def generate(net: GeneratorNet, z) -> np.ndarray:
    z, single = _batch(z, net.latent_dim)
    out, _ = net.run(z)
    return out[0] if single else out


def grad_wrt_latent(net: GeneratorNet, z, upstream) -> np.ndarray:
    z, single = _batch(z, net.latent_dim)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(len(z), net.n)
    _, tape = net.run(z)
    gz, _ = net.pullback(tape, upstream, need_params=False)
    return gz[0] if single else gz


def grad_wrt_weights(net: GeneratorNet, z, upstream) -> np.ndarray:
    """Gradient over the flat weight vector, summed over the batch."""
    z, _ = _batch(z, net.latent_dim)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(len(z), net.n)
    _, tape = net.run(z)
    _, gw = net.pullback(tape, upstream)
    return gw


def project_box(z) -> np.ndarray:
    return np.clip(z, 0.0, 1.0)


# --- architectures ----------------------------------------------------------


def generator_layers(latent_dim: int = 64, tau: int = 16):
    if tau == 16:
        return [Dense(latent_dim, 256), Reshape(16, 4, 4),
                UpsampleNearest(2), Conv2d(16, 8, 3, 1, 1), ReLU(),
                UpsampleNearest(2), Conv2d(8, 1, 3, 1, 1), Tanh()]
    if tau == 32:
        return [Dense(latent_dim, 256), Reshape(16, 4, 4),
                UpsampleNearest(2), Conv2d(16, 16, 3, 1, 1), ReLU(),
                UpsampleNearest(2), Conv2d(16, 8, 3, 1, 1), ReLU(),
                UpsampleNearest(2), Conv2d(8, 1, 3, 1, 1), Tanh()]
    raise ValueError(f"no built-in generator for tau={tau}; use 16 or 32")


def make_generator(latent_dim: int = 64, tau: int = 16, seed: int = 0,
                   std: float = 0.02) -> GeneratorNet:
    net = GeneratorNet((latent_dim,), generator_layers(latent_dim, tau), tau_out=tau)
    return net.init_weights(seed, std)


def linear_generator(W, c=None) -> GeneratorNet:
    """G(z) = W z + c with no output nonlinearity. W has shape (tau^2, d)."""
    W = np.asarray(W, dtype=np.float64)
    n, d = W.shape
    tau = int(round(np.sqrt(n)))
    if tau * tau != n:
        raise ShapeMismatch("W must have a square number of rows")
    c = np.zeros(n) if c is None else np.asarray(c, dtype=np.float64)
    return GeneratorNet((d,), [Dense(d, n), Identity()],
                        weights=np.concatenate([W.reshape(-1), c]), tau_out=tau)


# --- Adam -------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw):
        return cls(np.zeros_like(params, dtype=np.float64),
                   np.zeros_like(params, dtype=np.float64), **kw)


def adam_step(state: AdamState, params, grads, lr: float) -> np.ndarray:
    """One bias-corrected Adam update. Mutates ``state``, returns new params."""
    grads = np.asarray(grads, dtype=np.float64)
    if np.shape(params) != grads.shape or state.m.shape != grads.shape:
        raise ShapeMismatch("params, grads and optimiser state must share a shape")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


# --- GPPW weight file -------------------------------------------------------

GPPW_MAGIC = b"GPPW"
GPPW_VERSION = 1


def save_weights(path, net: GeneratorNet) -> None:
    parts = [GPPW_MAGIC, struct.pack("<IIII", GPPW_VERSION, net.latent_dim,
                                     net.tau_out, len(net.layers))]
    for layer in net.layers:
        fields = layer.header()
        parts.append(struct.pack("<B" + "I" * len(fields), layer.tag, *fields))
    parts.append(net.weights.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_weights(path) -> GeneratorNet:
    raw = Path(path).read_bytes()
    if raw[:4] != GPPW_MAGIC:
        raise FormatError(f"{path}: missing GPPW header")
    version, d, tau, count = struct.unpack_from("<IIII", raw, 4)
    if version != GPPW_VERSION:
        raise FormatError(f"{path}: unsupported GPPW version {version}")
    off = 20
    layers = []
    for _ in range(count):
        tag = raw[off]
        if tag not in LAYER_TYPES:
            raise FormatError(f"{path}: unknown layer tag {tag}")
        k = _HEADER_LEN[tag]
        fields = struct.unpack_from("<" + "I" * k, raw, off + 1)
        layers.append(LAYER_TYPES[tag](*fields))
        off += 1 + 4 * k
    net = GeneratorNet((d,), layers, tau_out=tau)
    w = np.frombuffer(raw, "<f4", net.num_params, off)
    net.weights = w.astype(np.float64)
    return net
