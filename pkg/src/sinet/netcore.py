"""Explicit ReLU networks: layers, composition, evaluation and size accounting.

A network is the map ``T_L o relu o T_{L-1} o ... o relu o T_1``.  Weights are
stored exactly as :class:`fractions.Fraction` in sparse coordinate form so that
the same object can be evaluated in 64-bit floats (fast, via scipy.sparse) or in
exact rational arithmetic (slow, for equality-grade checks on dyadic inputs).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import gmpy2
import numpy as np
from scipy import sparse

__all__ = [
    "AffineLayer",
    "ReluNet",
    "SizeBudget",
    "ParseError",
    "to_fraction",
    "default_mode",
    "evaluate",
    "compose",
    "stack",
    "parallel",
    "passthrough",
    "linear_net",
    "identity_net",
    "size",
    "serialize",
    "deserialize",
]

MODES = ("float", "rational")


class ParseError(ValueError):
    """Raised when a serialized network cannot be decoded."""


def to_fraction(v) -> Fraction:
    """Exact conversion; floats map to the dyadic rational they store."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    if isinstance(v, str):
        return Fraction(v)
    return Fraction(float(v))


def default_mode() -> str:
    mode = os.environ.get("SINET_MODE", "float").strip().lower()
    if mode not in MODES:
        raise ValueError(f"SINET_MODE must be one of {MODES}, got {mode!r}")
    return mode


class AffineLayer:
    """Affine map ``x -> W x + b`` with exact sparse weights.

    ``weights`` may be a dense array-like (rows = outputs) or a dict mapping
    ``(row, col)`` to a value, in which case ``shape`` must be given.
    """

    __slots__ = ("n_out", "n_in", "rows", "cols", "vals", "bias", "_csr", "_fbias", "_q")

    def __init__(self, weights, bias, shape=None):
        if isinstance(weights, dict):
            if shape is None:
                raise ValueError("shape is required for dict weights")
            n_out, n_in = shape
            entries = {}
            for (i, j), v in weights.items():
                if not (0 <= i < n_out and 0 <= j < n_in):
                    raise ValueError(f"entry {(i, j)} outside shape {shape}")
                fv = to_fraction(v)
                if fv:
                    entries[(i, j)] = entries.get((i, j), 0) + fv
        else:
            dense = list(weights)
            rows_ = [list(r) for r in dense]
            n_out = len(rows_)
            n_in = len(rows_[0]) if rows_ else (shape[1] if shape else 0)
            if shape is not None and tuple(shape) != (n_out, n_in):
                raise ValueError(f"weights shape {(n_out, n_in)} != {tuple(shape)}")
            entries = {}
            for i, r in enumerate(rows_):
                if len(r) != n_in:
                    raise ValueError("ragged weight matrix")
                for j, v in enumerate(r):
                    fv = to_fraction(v)
                    if fv:
                        entries[(i, j)] = fv
        bias = [to_fraction(v) for v in bias]
        if len(bias) != n_out:
            raise ValueError(f"bias length {len(bias)} != row count {n_out}")
        keys = sorted(k for k, v in entries.items() if v)
        self.n_out = int(n_out)
        self.n_in = int(n_in)
        self.rows = np.array([k[0] for k in keys], dtype=np.int64)
        self.cols = np.array([k[1] for k in keys], dtype=np.int64)
        self.vals = np.empty(len(keys), dtype=object)
        self.vals[:] = [entries[k] for k in keys]
        self.bias = np.empty(n_out, dtype=object)
        self.bias[:] = bias
        self._csr = None
        self._fbias = None
        self._q = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_out, self.n_in)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def entries(self) -> dict:
        return {(int(i), int(j)): v for i, j, v in zip(self.rows, self.cols, self.vals)}

    @property
    def matrix(self) -> sparse.csr_array:
        if self._csr is None:
            data = np.array([float(v) for v in self.vals], dtype=np.float64)
            self._csr = sparse.csr_array((data, (self.rows, self.cols)), shape=self.shape)
        return self._csr

    @property
    def float_bias(self) -> np.ndarray:
        if self._fbias is None:
            self._fbias = np.array([float(v) for v in self.bias], dtype=np.float64)
        return self._fbias

    @property
    def weights(self) -> np.ndarray:
        """Dense float64 copy of the weight matrix."""
        return self.matrix.toarray()

    def apply_float(self, h: np.ndarray) -> np.ndarray:
        return self.matrix @ h + self.float_bias[:, None]

    def _mpq(self):
        if self._q is None:
            vals = np.empty(self.nnz, dtype=object)
            vals[:] = [_to_mpq(v) for v in self.vals]
            self._q = (vals, [_to_mpq(v) for v in self.bias])
        return self._q

    def apply_exact(self, h: np.ndarray) -> np.ndarray:
        """Exact affine map on a ``(n_in, batch)`` object array of ``gmpy2.mpq``."""
        vals, bias = self._mpq()
        out = np.empty((self.n_out, h.shape[1]), dtype=object)
        for i in range(self.n_out):
            out[i, :] = bias[i]
        if self.nnz:
            contrib = vals[:, None] * h[self.cols, :]
            np.add.at(out, self.rows, contrib)
        return out

    def __eq__(self, other):
        if not isinstance(other, AffineLayer) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, AffineLayer) else False
        diff = self.matrix - other.matrix
        return bool(abs(diff).sum() == 0) and np.array_equal(self.float_bias, other.float_bias)

    __hash__ = None

    def __repr__(self):
        return f"AffineLayer({self.n_out}x{self.n_in}, nnz={self.nnz})"


class ReluNet:
    """Immutable layered ReLU network.

    Depth is the number of affine layers.  Width is the largest hidden-layer
    size, or ``max(input_dim, output_dim)`` when there are no hidden layers.
    """

    def __init__(self, layers, name: str = ""):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one affine layer")
        for k in range(1, len(layers)):
            if layers[k].n_in != layers[k - 1].n_out:
                raise ValueError(
                    f"layer {k} expects {layers[k].n_in} inputs but layer {k - 1} "
                    f"produces {layers[k - 1].n_out}"
                )
        self.layers = layers
        self.name = name

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        hidden = [layer.n_out for layer in self.layers[:-1]]
        if not hidden:
            return max(self.input_dim, self.output_dim)
        return max(hidden)

    @property
    def parameter_count(self) -> int:
        return sum(layer.n_out * layer.n_in + layer.n_out for layer in self.layers)

    def size(self) -> tuple[int, int, int]:
        return (self.width, self.depth, self.parameter_count)

    def __call__(self, x, mode: str | None = None):
        return evaluate(self, x, mode)

    def lipschitz_bound(self) -> float:
        """Upper bound on the l2 Lipschitz constant (product of layer norms).

        Each layer norm is bounded by ``sqrt(||W||_1 ||W||_inf)``.
        """
        out = 1.0
        for layer in self.layers:
            a = abs(layer.matrix)
            n1 = a.sum(axis=0).max() if layer.nnz else 0.0
            ninf = a.sum(axis=1).max() if layer.nnz else 0.0
            out *= float(np.sqrt(n1 * ninf))
        return out

    def __eq__(self, other):
        if not isinstance(other, ReluNet):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a == b for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return (
            f"ReluNet{tag}(in={self.input_dim}, out={self.output_dim}, "
            f"width={self.width}, depth={self.depth})"
        )


@dataclass(frozen=True)
class SizeBudget:
    width_bound: int
    depth_bound: int

    def __post_init__(self):
        if self.width_bound < 1 or self.depth_bound < 1:
            raise ValueError("budget bounds must be >= 1")

    def admits(self, net: ReluNet) -> bool:
        return net.width <= self.width_bound and net.depth <= self.depth_bound


def size(net: ReluNet) -> tuple[int, int, int]:
    """``(width, depth, parameter_count)``."""
    return net.size()


# --------------------------------------------------------------------------
# evaluation


def _to_mpq(v):
    f = to_fraction(v)
    return gmpy2.mpq(f.numerator, f.denominator)


def _as_batch(x, n_in: int, exact: bool):
    arr = np.asarray(x, dtype=object if exact else np.float64)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if single:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n_in:
        raise ValueError(f"expected input of dimension {n_in}, got shape {np.shape(x)}")
    if exact:
        conv = np.empty(arr.shape, dtype=object)
        conv[...] = [[_to_mpq(v) for v in row] for row in arr]
        arr = conv
    return arr.T.copy(), single


_QZERO = gmpy2.mpq(0)


def _relu_exact(h):
    out = h.copy()
    out[h < 0] = _QZERO
    return out


def evaluate(net: ReluNet, x, mode: str | None = None):
    """Evaluate ``net`` at one point (1-D input) or a batch (rows are points).

    ``mode`` is ``"float"`` or ``"rational"``; ``None`` reads ``SINET_MODE``.
    Rational mode returns an object array of :class:`~fractions.Fraction`.
    """
    mode = mode or default_mode()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    exact = mode == "rational"
    h, single = _as_batch(x, net.input_dim, exact)
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        if exact:
            h = layer.apply_exact(h)
            if k < last:
                h = _relu_exact(h)
        else:
            h = layer.apply_float(h)
            if k < last:
                np.maximum(h, 0.0, out=h)
    out = h.T
    if exact:
        conv = np.empty(out.shape, dtype=object)
        conv[...] = [[Fraction(int(v.numerator), int(v.denominator)) for v in row] for row in out]
        out = conv
    return out[0] if single else out


# --------------------------------------------------------------------------
# construction


def linear_net(weights, bias=None, shape=None, name: str = "") -> ReluNet:
    """Depth-1 network (a single affine map)."""
    if isinstance(weights, dict):
        n_out = shape[0]
    else:
        weights = [list(r) for r in weights]
        n_out = len(weights)
    if bias is None:
        bias = [0] * n_out
    return ReluNet([AffineLayer(weights, bias, shape=shape)], name=name)


def identity_net(dim: int = 1) -> ReluNet:
    return linear_net({(i, i): 1 for i in range(dim)}, shape=(dim, dim), name="identity")


def _matmul(second: AffineLayer, first: AffineLayer) -> AffineLayer:
    """Affine layer equal to ``second o first``."""
    by_row: dict[int, list] = {}
    for i, j, v in zip(first.rows, first.cols, first.vals):
        by_row.setdefault(int(i), []).append((int(j), v))
    entries: dict = {}
    bias = list(second.bias)
    for i, k, v in zip(second.rows, second.cols, second.vals):
        i, k = int(i), int(k)
        for j, w in by_row.get(k, ()):
            key = (i, j)
            entries[key] = entries.get(key, 0) + v * w
        bk = first.bias[k]
        if bk:
            bias[i] += v * bk
    return AffineLayer(entries, bias, shape=(second.n_out, first.n_in))


def compose(first: ReluNet, second: ReluNet, name: str = "") -> ReluNet:
    """Network for ``second o first``.

    The last affine layer of ``first`` and the first affine layer of ``second``
    are merged, so ``depth = depth(first) + depth(second) - 1``.
    """
    if first.output_dim != second.input_dim:
        raise ValueError(
            f"cannot compose: first outputs {first.output_dim}, "
            f"second expects {second.input_dim}"
        )
    merged = _matmul(second.layers[0], first.layers[-1])
    layers = first.layers[:-1] + (merged,) + second.layers[1:]
    return ReluNet(layers, name=name or second.name or first.name)


def chain(*nets: ReluNet, name: str = "") -> ReluNet:
    """Compose left to right: ``chain(a, b, c)`` computes ``c(b(a(x)))``."""
    out = nets[0]
    for n in nets[1:]:
        out = compose(out, n)
    if name:
        out = ReluNet(out.layers, name=name)
    return out


def passthrough(dim: int, sign: str = "signed", depth: int = 2) -> ReluNet:
    """Identity map realized with ReLU hidden layers.

    ``"nonneg"`` uses one neuron per channel and is exact only for inputs
    >= 0; ``"signed"`` uses the pair ``relu(x) - relu(-x)`` and is exact on R.
    """
    if sign not in ("signed", "nonneg"):
        raise ValueError(f"sign must be 'signed' or 'nonneg', got {sign!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth == 1:
        return identity_net(dim)
    if sign == "nonneg":
        eye = {(i, i): 1 for i in range(dim)}
        layers = [AffineLayer(eye, [0] * dim, shape=(dim, dim)) for _ in range(depth)]
        return ReluNet(layers, name="passthrough+")
    up = {}
    for i in range(dim):
        up[(2 * i, i)] = 1
        up[(2 * i + 1, i)] = -1
    mid = {(i, i): 1 for i in range(2 * dim)}
    down = {}
    for i in range(dim):
        down[(i, 2 * i)] = 1
        down[(i, 2 * i + 1)] = -1
    layers = [AffineLayer(up, [0] * (2 * dim), shape=(2 * dim, dim))]
    layers += [AffineLayer(mid, [0] * (2 * dim), shape=(2 * dim, 2 * dim)) for _ in range(depth - 2)]
    layers.append(AffineLayer(down, [0] * dim, shape=(dim, 2 * dim)))
    return ReluNet(layers, name="passthrough")


def pad_to_depth(net: ReluNet, depth: int, sign: str = "signed") -> ReluNet:
    """Extend ``net`` with passthrough layers on its outputs."""
    if net.depth > depth:
        raise ValueError(f"net has depth {net.depth} > {depth}")
    if net.depth == depth:
        return net
    return compose(net, passthrough(net.output_dim, sign, depth - net.depth + 1))


def _block_diag(layers) -> AffineLayer:
    entries = {}
    bias = []
    ro = co = 0
    for layer in layers:
        for i, j, v in zip(layer.rows, layer.cols, layer.vals):
            entries[(ro + int(i), co + int(j))] = v
        bias.extend(layer.bias)
        ro += layer.n_out
        co += layer.n_in
    return AffineLayer(entries, bias, shape=(ro, co))


def stack(nets, depth_pad: bool = True, pad_sign="signed", name: str = "") -> ReluNet:
    """Block-diagonal network evaluating each net on its own slice of the input.

    Shallower nets are extended to the common depth with passthrough layers when
    ``depth_pad`` is set.  ``pad_sign`` is one sign for all nets or a list with
    one entry per net; ``"nonneg"`` is only valid for nets whose outputs are
    known to be >= 0 on the inputs of interest.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("nothing to stack")
    depth = max(n.depth for n in nets)
    signs = [pad_sign] * len(nets) if isinstance(pad_sign, str) else list(pad_sign)
    padded = []
    for n, sgn in zip(nets, signs):
        if n.depth != depth:
            if not depth_pad:
                raise ValueError(
                    f"cannot stack nets of depths {[m.depth for m in nets]} without padding"
                )
            n = pad_to_depth(n, depth, sgn)
        padded.append(n)
    layers = [_block_diag([n.layers[k] for n in padded]) for k in range(depth)]
    return ReluNet(layers, name=name)


def fanout(dim: int, copies) -> ReluNet:
    """Linear map sending ``x`` to the concatenation of selected coordinates.

    ``copies`` is a list of index lists; output block ``b`` is ``x[copies[b]]``.
    """
    entries = {}
    r = 0
    for idx in copies:
        for i in idx:
            entries[(r, i)] = 1
            r += 1
    return linear_net(entries, shape=(r, dim))


def parallel(nets, input_maps=None, depth_pad: bool = True, pad_sign="signed",
             name: str = "") -> ReluNet:
    """Run several nets on (subsets of) a shared input and concatenate outputs.

    ``input_maps[b]`` lists which input coordinates feed net ``b`` (default:
    all of them, in order).
    """
    nets = list(nets)
    if input_maps is None:
        dim = nets[0].input_dim
        input_maps = [list(range(dim))] * len(nets)
    else:
        dim = 1 + max((max(m) for m in input_maps if m), default=-1)
    for n, m in zip(nets, input_maps):
        if len(m) != n.input_dim:
            raise ValueError("input map length must match the net input dim")
    return compose(fanout(dim, input_maps), stack(nets, depth_pad, pad_sign), name=name)


def affine_map(net: ReluNet, weights, bias=None, shape=None) -> ReluNet:
    """Post-compose ``net`` with an affine map (no extra depth)."""
    return compose(net, linear_net(weights, bias, shape=shape))


def precompose_affine(net: ReluNet, weights, bias=None, shape=None) -> ReluNet:
    """Pre-compose ``net`` with an affine map of its input (no extra depth)."""
    return compose(linear_net(weights, bias, shape=shape), net)


# --------------------------------------------------------------------------
# serialization

WIRE_VERSION = 1


def to_document(net: ReluNet, sparse_layers: bool = False) -> dict:
    layers = []
    for layer in net.layers:
        bias = [float(v) for v in layer.bias]
        if sparse_layers:
            layers.append({
                "shape": [layer.n_out, layer.n_in],
                "entries": [[int(i), int(j), float(v)]
                            for i, j, v in zip(layer.rows, layer.cols, layer.vals)],
                "bias": bias,
            })
        else:
            layers.append({"weights": layer.weights.tolist(), "bias": bias})
    return {"version": WIRE_VERSION, "input_dim": net.input_dim, "layers": layers}


def serialize(net: ReluNet, sparse_layers: bool = False) -> bytes:
    """JSON wire format; dense row-major weights unless ``sparse_layers``."""
    return json.dumps(to_document(net, sparse_layers)).encode("utf-8")


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return Fraction(v)


def from_document(doc) -> ReluNet:
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    if doc.get("version") != WIRE_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise ParseError("missing or empty 'layers'")
    input_dim = doc.get("input_dim")
    if not isinstance(input_dim, int) or input_dim < 1:
        raise ParseError("'input_dim' must be a positive integer")
    layers = []
    n_in = input_dim
    for idx, ld in enumerate(layers_doc):
        where = f"layer {idx}"
        if not isinstance(ld, dict) or "bias" not in ld:
            raise ParseError(f"{where}: expected an object with 'bias'")
        if not isinstance(ld["bias"], list):
            raise ParseError(f"{where}: 'bias' must be a list")
        bias = [_num(v, where) for v in ld["bias"]]
        try:
            if "entries" in ld:
                n_out, cols = ld["shape"]
                entries = {(int(i), int(j)): _num(v, where) for i, j, v in ld["entries"]}
                layer = AffineLayer(entries, bias, shape=(n_out, cols))
            else:
                w = ld["weights"]
                if not isinstance(w, list) or not all(isinstance(r, list) for r in w):
                    raise ParseError(f"{where}: 'weights' must be a list of rows")
                rows = [[_num(v, where) for v in r] for r in w]
                layer = AffineLayer(rows, bias, shape=(len(rows), n_in))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        if layer.n_in != n_in:
            raise ParseError(f"{where}: expects {layer.n_in} inputs, previous layer gives {n_in}")
        layers.append(layer)
        n_in = layer.n_out
    return ReluNet(layers)


def deserialize(data) -> ReluNet:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return from_document(doc)
