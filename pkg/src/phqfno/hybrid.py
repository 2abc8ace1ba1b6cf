"""Partitioned hybrid operator: lift, split channels, run both branches, project.

1D::

    [u, x] -> lift -> split -> quantum groups (4 channels each, serial)
                            -> classical Fourier layer (remaining channels)
           -> concat -> linear projection

2D: the quantum share of the lifted field is cut into four 4x4 quadrants, each
with its own angles; after concatenation a residual global convolution mixes
everything before the projection network.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .binfmt import canonical_json, read_container, write_container
from .fno import conv_bypass, fourier_layer_classical
from .qlayer import quantum_fourier_1d, quantum_fourier_2d
from .statevec import MAX_QUBITS
from .variational import classical_param_count, orthogonal_param_count, quantum_param_count

QUADRANT = 4


class ConfigError(ValueError):
    pass


@dataclass
class HybridConfig:
    dim: int = 1
    grid: int = 8
    d_v: int = 4
    d_q: int = 4
    q_groups: int = 1
    modes: int | tuple[int, int] = 1
    conv_kernel: int = 1
    global_kernel: int = 3
    proj_hidden: int | None = None
    activation: str = "gelu"
    init_seed: int = 0

    def __post_init__(self):
        if isinstance(self.modes, list):
            self.modes = tuple(self.modes)
        if self.dim == 2 and isinstance(self.modes, int):
            self.modes = (self.modes, self.modes)
        if self.proj_hidden is None:
            self.proj_hidden = 0 if self.dim == 1 else 32
        self.validate()

    @property
    def d_quantum(self) -> int:
        return self.d_q * self.q_groups

    @property
    def d_c(self) -> int:
        return self.d_v - self.d_quantum

    @property
    def hybridization(self) -> float:
        return self.d_quantum / self.d_v

    @property
    def in_channels(self) -> int:
        return self.dim + 1

    @property
    def mode_tuple(self) -> tuple[int, ...]:
        return (self.modes,) if self.dim == 1 else tuple(self.modes)

    def validate(self) -> None:
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.grid < 2 or self.grid & (self.grid - 1):
            raise ConfigError(f"grid {self.grid} is not a power of two")
        if self.d_v < 1:
            raise ConfigError("d_v must be positive")
        if self.q_groups < 0 or self.d_q < 0:
            raise ConfigError("quantum widths must be non-negative")
        if self.d_quantum > self.d_v:
            raise ConfigError(f"quantum share {self.d_quantum} exceeds d_v={self.d_v}")
        modes = self.mode_tuple
        if any(k < 0 or k > self.grid for k in modes):
            raise ConfigError(f"modes {modes} outside [0, {self.grid}]")
        if self.d_quantum:
            if self.d_q not in (2, 4, 8) or self.d_q & (self.d_q - 1):
                raise ConfigError(f"quantum group width {self.d_q} must be a power of two >= 2")
            spatial = self.grid if self.dim == 1 else 2 * QUADRANT
            if self.d_q + spatial > MAX_QUBITS:
                raise ConfigError(f"{self.d_q} + {spatial} wires exceed {MAX_QUBITS} qubits")
            if self.dim == 2:
                if self.grid != 2 * QUADRANT:
                    raise ConfigError("the 2D quantum branch needs an 8x8 grid")
                if any(k > QUADRANT for k in modes):
                    raise ConfigError(f"modes {modes} exceed the {QUADRANT}x{QUADRANT} subblocks")
        if self.conv_kernel % 2 == 0 or self.global_kernel % 2 == 0:
            raise ConfigError("kernel sizes must be odd")
        if self.activation not in ad.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["modes"], tuple):
            d["modes"] = list(d["modes"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HybridConfig":
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict())).hexdigest()[:16]


# Latent-width splits: name -> (dim, d_v, d_q, groups)
TABLE_CONFIGS = {
    "burgers-100-4": (1, 4, 4, 1),
    "burgers-100-12": (1, 12, 4, 3),
    "burgers-66": (1, 12, 4, 2),
    "burgers-33": (1, 12, 4, 1),
    "ns-100": (2, 4, 4, 1),
    "ns-33": (2, 12, 4, 1),
    "kh-50": (2, 8, 4, 1),
}


def table_config(name: str, **overrides) -> HybridConfig:
    dim, d_v, d_q, groups = TABLE_CONFIGS[name]
    return HybridConfig(dim=dim, d_v=d_v, d_q=d_q, q_groups=groups, **overrides)


def classical_config(dim: int = 1, d_v: int = 4, **overrides) -> HybridConfig:
    return HybridConfig(dim=dim, d_v=d_v, d_q=0, q_groups=0, **overrides)


# --- parameters ----------------------------------------------------------------

def quadrants() -> list[tuple[int, int]]:
    return [(a, b) for a in range(2) for b in range(2)]


def param_shapes(cfg: HybridConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "lift_w": (cfg.in_channels, cfg.d_v),
        "lift_b": (cfg.d_v,),
    }
    modes = cfg.mode_tuple
    if cfg.d_quantum:
        d = orthogonal_param_count(cfg.d_q)
        for g in range(cfg.q_groups):
            if cfg.dim == 1:
                shapes[f"q{g}_theta"] = modes + (d,)
            else:
                for a, b in quadrants():
                    shapes[f"q{g}_b{a}{b}_theta"] = modes + (d,)
    if cfg.d_c:
        c = cfg.d_c
        ks = (cfg.conv_kernel,) * cfg.dim
        shapes.update({"c_w_re": modes + (c, c), "c_w_im": modes + (c, c),
                       "c_conv": ks + (c, c), "c_conv_b": (c,)})
    if cfg.dim == 2:
        shapes["w_conv"] = (cfg.global_kernel,) * 2 + (cfg.d_v, cfg.d_v)
        shapes["w_conv_b"] = (cfg.d_v,)
    if cfg.proj_hidden:
        shapes.update({"proj1_w": (cfg.d_v, cfg.proj_hidden), "proj1_b": (cfg.proj_hidden,),
                       "proj2_w": (cfg.proj_hidden, 1), "proj2_b": (1,)})
    else:
        shapes.update({"proj_w": (cfg.d_v, 1), "proj_b": (1,)})
    return shapes


def init_params(cfg: HybridConfig, seed: int | None = None) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.init_seed if seed is None else seed)
    out = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("_theta"):
            out[name] = rng.normal(0.0, 0.5, shape)
        elif name in ("c_w_re", "c_w_im"):
            c = shape[-1]
            out[name] = rng.uniform(0.0, 1.0 / c, shape)
        elif name.endswith("_b"):
            out[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            bound = 1.0 / np.sqrt(fan_in)
            out[name] = rng.uniform(-bound, bound, shape)
    return out


def count_params(cfg: HybridConfig) -> dict[str, int]:
    """Trainable spectral parameters: quantum angles and complex classical weights."""
    n_modes = int(np.prod(cfg.mode_tuple))
    blocks = 1 if cfg.dim == 1 else 4
    return {
        "quantum": quantum_param_count(cfg.d_q, n_modes, cfg.q_groups * blocks)
        if cfg.d_quantum else 0,
        "classical": classical_param_count(cfg.d_c, n_modes),
    }


def as_tensors(params: dict[str, np.ndarray], trainable: bool = True) -> dict[str, Tensor]:
    if trainable:
        return {k: Tensor.parameter(v, k) for k, v in params.items()}
    return {k: Tensor(v) for k, v in params.items()}


# --- forward -------------------------------------------------------------------

def coordinates(grid: int, dim: int) -> np.ndarray:
    x = np.arange(grid) / grid
    if dim == 1:
        return x[:, None]
    gx, gy = np.meshgrid(x, x, indexing="ij")
    return np.stack([gx, gy], axis=-1)


def with_coordinates(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    coords = coordinates(u.shape[-1], dim)
    coords = np.broadcast_to(coords, u.shape + (dim,))
    return np.concatenate([u[..., None], coords], axis=-1)


def partition_channels(x, cfg: HybridConfig) -> tuple[list[Tensor], Tensor | None]:
    """Quantum groups (first ``d_q * q_groups`` channels) and the classical rest."""
    x = ad._lift(x)
    if x.shape[-1] != cfg.d_v:
        raise ConfigError(f"expected {cfg.d_v} channels, got {x.shape[-1]}")
    groups = [x[..., g * cfg.d_q:(g + 1) * cfg.d_q] for g in range(cfg.q_groups)] \
        if cfg.d_quantum else []
    rest = x[..., cfg.d_quantum:] if cfg.d_c else None
    return groups, rest


def slice_2d_blocks(y) -> dict[tuple[int, int], Tensor]:
    """Four disjoint 4x4 quadrants of a ``(B, 8, 8, c)`` field."""
    y = ad._lift(y)
    if y.ndim != 4 or y.shape[1:3] != (2 * QUADRANT, 2 * QUADRANT):
        raise ConfigError(f"expected a (B, 8, 8, c) field, got {y.shape}")
    q = QUADRANT
    return {(a, b): y[:, a * q:(a + 1) * q, b * q:(b + 1) * q] for a, b in quadrants()}


def assemble_2d_blocks(blocks: dict[tuple[int, int], Tensor]) -> Tensor:
    rows = [ad.concat([blocks[(a, 0)], blocks[(a, 1)]], axis=2) for a in range(2)]
    return ad.concat(rows, axis=1)


def _project(h: Tensor, p: dict[str, Tensor], cfg: HybridConfig) -> Tensor:
    if cfg.proj_hidden:
        z = ad.gelu(ad.matmul(h, p["proj1_w"]) + p["proj1_b"])
        out = ad.matmul(z, p["proj2_w"]) + p["proj2_b"]
    else:
        out = ad.matmul(h, p["proj_w"]) + p["proj_b"]
    return ad.reshape(out, out.shape[:-1])


def _classical_params(p: dict[str, Tensor]) -> dict[str, Tensor]:
    return {"w_re": p["c_w_re"], "w_im": p["c_w_im"], "conv": p["c_conv"],
            "conv_b": p["c_conv_b"]}


def forward(u, params: dict, cfg: HybridConfig, capture: dict | None = None) -> Tensor:
    """Map raw input fields ``(B, *grid)`` to output fields of the same shape.

    ``params`` values may be arrays or tensors. If ``capture`` is a dict, the
    outputs of the quantum and classical Fourier layers are stored in it.
    """
    p = {k: ad._lift(v) for k, v in params.items()}
    u = np.asarray(u, dtype=float)
    expect = (cfg.grid,) * cfg.dim
    if u.shape[1:] != expect:
        raise ConfigError(f"input grid {u.shape[1:]} does not match config {expect}")
    x = Tensor(with_coordinates(u, cfg.dim))
    v = ad.matmul(x, p["lift_w"]) + p["lift_b"]
    return forward_lifted(v, p, cfg, capture)


def forward_lifted(v, p: dict[str, Tensor], cfg: HybridConfig,
                   capture: dict | None = None) -> Tensor:
    groups, rest = partition_channels(v, cfg)
    parts: list[Tensor] = []
    q_out: list[Tensor] = []
    for g, xq in enumerate(groups):
        if cfg.dim == 1:
            q_out.append(quantum_fourier_1d(xq, p[f"q{g}_theta"], cfg.modes))
        else:
            blocks = {ab: quantum_fourier_2d(blk, p[f"q{g}_b{ab[0]}{ab[1]}_theta"], cfg.modes)
                      for ab, blk in slice_2d_blocks(xq).items()}
            q_out.append(assemble_2d_blocks(blocks))
    parts.extend(q_out)
    if rest is not None:
        c_out = fourier_layer_classical(rest, _classical_params(p), cfg.mode_tuple,
                                        cfg.activation)
        parts.append(c_out)
        if capture is not None:
            capture["classical"] = c_out.data
    if capture is not None and q_out:
        capture["quantum"] = np.concatenate([t.data for t in q_out], axis=-1)
    h = parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1)
    if cfg.dim == 2:
        h = ad.ACTIVATIONS[cfg.activation](h + conv_bypass(h, p["w_conv"], p["w_conv_b"]))
    return _project(h, p, cfg)


def forward_1d(u0, params: dict, cfg: HybridConfig) -> Tensor:
    if cfg.dim != 1:
        raise ConfigError("forward_1d needs a 1D config")
    return forward(u0, params, cfg)


def forward_2d(w0, params: dict, cfg: HybridConfig) -> Tensor:
    if cfg.dim != 2:
        raise ConfigError("forward_2d needs a 2D config")
    return forward(w0, params, cfg)


def classical_fno_forward(u, params: dict, cfg: HybridConfig) -> Tensor:
    """Plain FNO (no quantum branch) written out independently of :func:`forward`."""
    if cfg.d_quantum:
        raise ConfigError("config has a quantum share")
    p = {k: ad._lift(v) for k, v in params.items()}
    x = Tensor(with_coordinates(u, cfg.dim))
    v = ad.matmul(x, p["lift_w"]) + p["lift_b"]
    h = fourier_layer_classical(v, _classical_params(p), cfg.mode_tuple, cfg.activation)
    if cfg.dim == 2:
        h = ad.ACTIVATIONS[cfg.activation](h + conv_bypass(h, p["w_conv"], p["w_conv_b"]))
    return _project(h, p, cfg)


# --- checkpoints -----------------------------------------------------------------

@dataclass
class Checkpoint:
    config: HybridConfig
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, cfg: HybridConfig, params: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    shapes = param_shapes(cfg)
    for name, shape in shapes.items():
        if name not in params or tuple(np.shape(params[name])) != shape:
            raise ConfigError(f"parameter {name!r} missing or wrong shape")
    header = {"config": cfg.to_dict(), "config_digest": cfg.digest(), "meta": meta or {}}
    write_container(Path(path), "CKPT", header, {k: params[k] for k in shapes})


def load_checkpoint(path) -> Checkpoint:
    header, arrays = read_container(Path(path), "CKPT")
    cfg = HybridConfig.from_dict(header["config"])
    shapes = param_shapes(cfg)
    if set(arrays) != set(shapes):
        raise ConfigError(f"checkpoint parameters {sorted(arrays)} do not match config")
    for k, shape in shapes.items():
        if arrays[k].shape != shape:
            raise ConfigError(f"parameter {k!r} has shape {arrays[k].shape}, expected {shape}")
    return Checkpoint(cfg, arrays, header.get("meta", {}))
