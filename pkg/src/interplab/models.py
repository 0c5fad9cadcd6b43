"""Fully connected networks with a flat, canonical parameter layout.

The flat layout is ``[W1 (row-major), b1, W2, b2, ..., WL, bL]`` where
``W_l`` has shape ``(m_l, m_{l-1})``. Every sampler, embedding and serializer
in the package uses this layout.

Most numerical kernels below accept an optional leading batch axis on the
parameters (shape ``(P, d)``), which lets samplers and the Lipschitz probe
evaluate many parameter vectors in one vectorized pass.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, NonFiniteLoss
from .linalg import SeededRng

ACTIVATIONS = ("identity", "tanh", "sigmoid", "softplus")
FAMILIES = ("dlnn", "fcdnn")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "softplus":
        return np.logaddexp(0.0, z)
    raise InvalidSpec(f"unknown activation {name!r}")


def activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return np.ones_like(z)
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    if name == "softplus":
        return _sigmoid(z)
    raise InvalidSpec(f"unknown activation {name!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths ``[m0, ..., mL]`` plus activation and model family.

    Only real-analytic activations are accepted. ``family="dlnn"`` forces the
    identity activation.
    """

    widths: tuple[int, ...]
    activation: str = "identity"
    family: str = "dlnn"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise InvalidSpec("need at least input and output widths")
        if any(w < 1 for w in widths):
            raise InvalidSpec(f"widths must be positive, got {widths}")
        if self.family not in FAMILIES:
            raise InvalidSpec(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.activation == "relu":
            raise InvalidSpec(
                "relu is not real analytic; use identity, tanh, sigmoid or softplus"
            )
        if self.activation not in ACTIVATIONS:
            raise InvalidSpec(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.family == "dlnn" and self.activation != "identity":
            raise InvalidSpec("dlnn networks use the identity activation")

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def n_params(self) -> int:
        return param_count(self)

    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[i + 1], self.widths[i]) for i in range(self.depth)]

    def layer_slices(self) -> list[tuple[slice, slice]]:
        """``(weight_slice, bias_slice)`` into the flat vector for each layer."""
        out, pos = [], 0
        for m_out, m_in in self.layer_shapes():
            w = slice(pos, pos + m_out * m_in)
            pos += m_out * m_in
            b = slice(pos, pos + m_out)
            pos += m_out
            out.append((w, b))
        return out

    def to_dict(self) -> dict:
        return {"widths": list(self.widths), "activation": self.activation, "family": self.family}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(d["widths"]), d.get("activation", "identity"), d.get("family", "dlnn"))


def param_count(spec: NetworkSpec) -> int:
    w = spec.widths
    return sum(w[i] * (w[i - 1] + 1) for i in range(1, len(w)))


@dataclass(frozen=True)
class DomainBox:
    """The compact parameter domain ``[-B, B]^d``."""

    half_width: float = 10.0

    def __post_init__(self):
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError("half_width must be positive and finite")

    def contains(self, data) -> bool:
        return bool(np.all(np.abs(np.asarray(data)) <= self.half_width))

    def sample(self, d: int, gen: np.random.Generator, size=None) -> np.ndarray:
        shape = (d,) if size is None else (size, d)
        return gen.uniform(-self.half_width, self.half_width, size=shape)


def unpack(spec: NetworkSpec, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W, b)`` per layer; ``flat`` may carry a leading batch axis."""
    lead = flat.shape[:-1]
    return [
        (flat[..., ws].reshape(lead + shape), flat[..., bs])
        for (ws, bs), shape in zip(spec.layer_slices(), spec.layer_shapes())
    ]


@dataclass(frozen=True, eq=False)
class ParamVector:
    """A parameter vector theta for ``spec`` in the canonical flat layout.

    The array is stored read-only. Membership in the parameter box is checked
    by :meth:`DomainBox.contains`, since the box is chosen per experiment.
    """

    spec: NetworkSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64).reshape(-1)
        if arr.size != param_count(self.spec):
            raise DimensionMismatch(
                f"{self.spec.widths} needs {param_count(self.spec)} parameters, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("parameters must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __len__(self):
        return self.data.size

    def layers(self):
        return unpack(self.spec, self.data)

    @classmethod
    def from_layers(cls, spec: NetworkSpec, layers: Sequence[tuple]) -> "ParamVector":
        parts = []
        for (w, b), shape in zip(layers, spec.layer_shapes()):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64).reshape(-1)
            if w.shape != shape or b.shape != (shape[0],):
                raise DimensionMismatch(f"layer shape {w.shape}/{b.shape}, expected {shape}")
            parts += [w.reshape(-1), b]
        if len(parts) != 2 * spec.depth:
            raise DimensionMismatch(f"expected {spec.depth} layers, got {len(parts) // 2}")
        return cls(spec, np.concatenate(parts))

    def with_data(self, data) -> "ParamVector":
        return ParamVector(self.spec, data)

    # Binary format: one JSON header line, then little-endian float64 values.
    def to_bytes(self) -> bytes:
        header = json.dumps(self.spec.to_dict(), sort_keys=True).encode() + b"\n"
        return header + self.data.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ParamVector":
        head, _, body = raw.partition(b"\n")
        spec = NetworkSpec.from_dict(json.loads(head))
        return cls(spec, np.frombuffer(body, dtype="<f8").copy())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ParamVector":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self) -> str:
        buf = io.StringIO()
        for v in self.data:
            buf.write(f"{v:.17g}\n")
        return buf.getvalue()


def xavier_uniform(spec: NetworkSpec, gen: np.random.Generator, size=None) -> np.ndarray:
    """Flat Xavier/Glorot-uniform weights with zero biases.

    With ``size`` set, returns ``size`` independent draws stacked as rows.
    """
    d = param_count(spec)
    out = np.zeros((d,) if size is None else (size, d))
    for (ws, _), (m_out, m_in) in zip(spec.layer_slices(), spec.layer_shapes()):
        limit = np.sqrt(6.0 / (m_in + m_out))
        n = ws.stop - ws.start
        out[..., ws] = gen.uniform(-limit, limit, size=(n,) if size is None else (size, n))
    return out


# ---------------------------------------------------------------------------
# forward / backward kernels


def _forward(spec: NetworkSpec, layers, x: np.ndarray):
    """Returns pre-activations and post-activations, input first."""
    acts, pres = [x], []
    a = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        # Elementwise product + last-axis reduction instead of BLAS: each row's
        # result is then bit-identical whatever the batch size.
        z = np.sum(a[..., :, None, :] * w[..., None, :, :], axis=-1) + b[..., None, :]
        pres.append(z)
        a = z if i == last else activate(spec.activation, z)
        acts.append(a)
    return pres, acts


def _backward(spec: NetworkSpec, layers, pres, acts, g_out: np.ndarray, per_sample: bool):
    """Reverse pass from ``g_out = dOut`` (shape ``(..., n, m_L)``).

    Returns the gradient in flat layout, summed over samples, or one flat row
    per sample when ``per_sample`` is set.
    """
    grads = [None] * len(layers)
    g = g_out
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        a_prev = acts[i]
        if per_sample:
            gw = g[..., :, None] * a_prev[..., None, :]
            gb = g
            grads[i] = (gw.reshape(gw.shape[:-2] + (-1,)), gb)
        else:
            gw = np.swapaxes(g, -1, -2) @ a_prev
            gb = g.sum(axis=-2)
            grads[i] = (gw.reshape(gw.shape[:-2] + (-1,)), gb)
        if i > 0:
            g = (g @ w) * activate_grad(spec.activation, pres[i - 1])
    parts = [p for pair in grads for p in pair]
    return np.concatenate(parts, axis=-1)


def _check_inputs(spec: NetworkSpec, x: np.ndarray):
    if x.shape[-1] != spec.widths[0]:
        raise DimensionMismatch(f"input has width {x.shape[-1]}, network expects {spec.widths[0]}")


def forward(params: ParamVector, x) -> np.ndarray:
    """Network output for one input ``(m0,)`` or a batch ``(n, m0)``."""
    x = np.asarray(x, dtype=np.float64)
    _check_inputs(params.spec, x)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    _, acts = _forward(params.spec, params.layers(), xb)
    out = acts[-1]
    return out[0] if single else out


def batch_forward(spec: NetworkSpec, thetas: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Outputs for stacked flat parameters ``(P, d)`` on inputs ``(n, m0)``."""
    _check_inputs(spec, x)
    _, acts = _forward(spec, unpack(spec, thetas), x)
    return acts[-1]


def batch_losses(spec: NetworkSpec, thetas: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared-loss training error for each row of ``thetas``."""
    r = batch_forward(spec, thetas, x) - y
    return 0.5 * np.einsum("...ij,...ij->...", r, r) / x.shape[0]


def loss_from_arrays(spec: NetworkSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    _, acts = _forward(spec, unpack(spec, theta), x)
    r = acts[-1] - y
    val = 0.5 * float(np.sum(r * r)) / x.shape[0]
    if not np.isfinite(val):
        raise NonFiniteLoss("training loss is not finite")
    return val


def loss_and_gradient(spec: NetworkSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray):
    _check_inputs(spec, x)
    if y.shape != (x.shape[0], spec.widths[-1]):
        raise DimensionMismatch(f"outputs have shape {y.shape}, expected {(x.shape[0], spec.widths[-1])}")
    layers = unpack(spec, theta)
    pres, acts = _forward(spec, layers, x)
    r = acts[-1] - y
    n = x.shape[0]
    loss = 0.5 * float(np.sum(r * r)) / n
    if not np.isfinite(loss):
        raise NonFiniteLoss("training loss is not finite")
    grad = _backward(spec, layers, pres, acts, r / n, per_sample=False)
    return loss, grad


def gradient(params: ParamVector, dataset) -> np.ndarray:
    """Gradient of the mean squared loss ``(1/n) sum 1/2 |y - f(x)|^2``.

    ``dataset`` is anything with ``inputs`` and ``outputs`` arrays.
    """
    x = np.asarray(dataset.inputs, dtype=np.float64)
    y = np.asarray(dataset.outputs, dtype=np.float64)
    if x.shape[0] < 1:
        raise DimensionMismatch("empty dataset")
    return loss_and_gradient(params.spec, params.data, x, y)[1]


def _jacobians(spec: NetworkSpec, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Per-probe parameter Jacobians, shape ``(P, m_L, d)``.

    ``thetas`` is ``(P, d)`` and ``xs`` is ``(P, m0)``. Each output row is one
    reverse pass, seeded with a unit vector; the ``m_L`` passes run together
    by repeating the input along the sample axis.
    """
    m_out = spec.widths[-1]
    layers = unpack(spec, thetas)
    xrep = np.repeat(xs[:, None, :], m_out, axis=1)
    pres, acts = _forward(spec, layers, xrep)
    seed = np.broadcast_to(np.eye(m_out), (thetas.shape[0], m_out, m_out))
    return _backward(spec, layers, pres, acts, seed, per_sample=True)


def spectral_norm(jac: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> np.ndarray:
    """Largest singular value of each ``(m, d)`` matrix in a stack, by power iteration."""
    gram = jac @ np.swapaxes(jac, -1, -2)
    m = gram.shape[-1]
    if m == 1:
        return np.sqrt(gram[..., 0, 0])
    v = np.ones(gram.shape[:-1]) / np.sqrt(m)
    lam = np.zeros(gram.shape[:-2])
    for _ in range(max_iter):
        w = np.einsum("...ij,...j->...i", gram, v)
        new = np.linalg.norm(w, axis=-1)
        safe = np.where(new > 0, new, 1.0)
        v = w / safe[..., None]
        done = np.all(np.abs(new - lam) <= tol * np.maximum(new, 1e-300))
        lam = new
        if done:
            break
    return np.sqrt(lam)


def param_jacobian(params: ParamVector, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_inputs(params.spec, x)
    return _jacobians(params.spec, params.data[None, :], x[None, :])[0]


def param_jacobian_norm(params: ParamVector, x) -> float:
    """Spectral norm of the Jacobian of ``f(x; theta)`` with respect to theta."""
    jac = param_jacobian(params, x)
    val = float(spectral_norm(jac[None])[0])
    if not np.isfinite(val):
        raise NonFiniteLoss("Jacobian is not finite")
    return val


def estimate_lipschitz(
    spec: NetworkSpec,
    box: DomainBox,
    input_box,
    n_probe: int,
    rng: SeededRng,
    chunk: int = 4096,
) -> float:
    """Largest Jacobian norm over random ``(theta, x)`` probes.

    theta is uniform in the parameter box and x uniform in ``input_box``. The
    result is a lower estimate of the global Lipschitz constant in theta and,
    for a fixed ``rng``, non-decreasing in ``n_probe``.
    """
    if n_probe < 1:
        raise ValueError("n_probe must be >= 1")
    gen = rng.generator()
    d, m0 = param_count(spec), spec.widths[0]
    best = 0.0
    done = 0
    while done < n_probe:
        p = min(chunk, n_probe - done)
        # always draw whole chunks so smaller probe counts are prefixes of larger ones
        thetas = box.sample(d, gen, size=chunk)[:p]
        xs = input_box.sample(m0, gen, size=chunk)[:p]
        norms = spectral_norm(_jacobians(spec, thetas, xs))
        best = max(best, float(np.max(norms)))
        done += p
    return best
