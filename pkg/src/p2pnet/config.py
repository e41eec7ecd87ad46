"""Run configuration: ``key = value`` lines grouped under ``[train]``, ``[loss]``, ``[network]`` and ``[data]``.

Unknown sections and keys are rejected. Layer lists use a compact text form:
``sa_layers = 128/0.1/16,16,32/16 ; 48/0.2/32,32,64/16`` (K/r/widths/cap),
``fp_layers = 128,128 ; 128,64`` and ``fc_head = 32,16,2``.
Generator parameters go in ``[data]`` as ``param.<name> = <python literal>``.
"""

from __future__ import annotations

import ast
import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .datasynth import ConfigError, GeneratorSpec
from .layers import FC, FP, SA, NetworkConfig, desk_preset, full_preset
from .losses import LossWeights
from .trainer import TrainConfig

PRESETS = {"desk": desk_preset, "full": full_preset}


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    network: NetworkConfig = field(default_factory=lambda: desk_preset(2))
    data: GeneratorSpec = field(default_factory=GeneratorSpec)


def _fmt_sa(layers) -> str:
    return " ; ".join(f"{s.K}/{s.r!r}/{','.join(map(str, s.widths))}/{s.cap}" for s in layers)


def _fmt_widths(layers) -> str:
    return " ; ".join(",".join(map(str, s.widths)) for s in layers)


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_sa(text: str):
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.split("/")
        if len(parts) not in (3, 4):
            raise ConfigError(f"SA layer must be K/r/widths[/cap], got {chunk!r}")
        cap = int(parts[3]) if len(parts) == 4 else 32
        out.append(SA(int(parts[0]), float(parts[1]), _ints(parts[2]), cap))
    return tuple(out)


def _parse_fp(text: str):
    return tuple(FP(_ints(c)) for c in text.split(";") if c.strip())


def _parse_fc(text: str):
    return tuple(FC(w) for w in _ints(text))


def _scalar(text: str, kind):
    if kind is bool:
        low = text.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if kind is tuple:
        return tuple(float(t) for t in text.replace(",", " ").split())
    return kind(text.strip())


_TRAIN_KEYS = {
    "epochs": int, "lr_init": float, "lr_floor": float, "decay_points": tuple,
    "terminal_floor": bool, "batch_size": int, "noise": bool, "crossreg": bool,
    "seed": int, "random_fps": bool,
}
_LOSS_KEYS = {"lambda_density": float, "mu_reg": float, "k_density": int}
_NET_SCALARS = {"dim": int, "noise_len": int, "noise_std": float, "n_points": int, "xyz_skip": bool}
_NET_LAYERS = {"sa_layers": (_parse_sa, _fmt_sa), "fp_layers": (_parse_fp, _fmt_widths), "fc_head": (_parse_fc, lambda ls: ",".join(str(s.width) for s in ls))}
_DATA_KEYS = {"kind": str, "count": int, "points_per_set": int, "seed": int}


def parse_config(text: str) -> RunConfig:
    """Parse config text; any missing key keeps its default, ``[network] preset`` picks the base architecture."""
    cp = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"train", "loss", "network", "data"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]")
    base = RunConfig()

    def section(name, allowed):
        vals = dict(cp[name]) if cp.has_section(name) else {}
        for k in vals:
            if k not in allowed and not (name == "data" and k.startswith("param.")) and not (name == "network" and k == "preset"):
                raise ConfigError(f"unknown key {k!r} in [{name}]")
        return vals

    try:
        tr = section("train", _TRAIN_KEYS)
        lo = section("loss", _LOSS_KEYS)
        nw = section("network", {**_NET_SCALARS, **_NET_LAYERS})
        da = section("data", _DATA_KEYS)

        weights = LossWeights(**{k: _scalar(v, _LOSS_KEYS[k]) for k, v in lo.items()})
        train = TrainConfig(**{k: _scalar(v, _TRAIN_KEYS[k]) for k, v in tr.items()}, weights=weights)

        dim = int(nw.get("dim", base.network.dim))
        preset = nw.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown network preset {preset!r} (choose from {sorted(PRESETS)})")
            net = PRESETS[preset](dim)
        else:
            net = base.network if dim == base.network.dim else desk_preset(dim)
        over = {k: _scalar(v, _NET_SCALARS[k]) for k, v in nw.items() if k in _NET_SCALARS}
        over |= {k: _NET_LAYERS[k][0](v) for k, v in nw.items() if k in _NET_LAYERS}
        net = replace(net, **over)

        params = {k[len("param.") :]: ast.literal_eval(v) for k, v in da.items() if k.startswith("param.")}
        data = GeneratorSpec(**{k: _scalar(v, _DATA_KEYS[k]) for k, v in da.items() if k in _DATA_KEYS}, params=params)
    except (ValueError, SyntaxError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None
    return RunConfig(train, net, data)


def serialize_sections(cfg: RunConfig) -> dict[str, dict[str, str]]:
    t, w, n, d = cfg.train, cfg.train.weights, cfg.network, cfg.data

    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v)

    out = {
        "train": {f.name: val(getattr(t, f.name)) for f in fields(t) if f.name in _TRAIN_KEYS},
        "loss": {k: val(getattr(w, k)) for k in _LOSS_KEYS},
        "network": {k: val(getattr(n, k)) for k in _NET_SCALARS} | {k: fmt(getattr(n, k)) for k, (_, fmt) in _NET_LAYERS.items()},
        "data": {k: val(getattr(d, k)) for k in _DATA_KEYS} | {f"param.{k}": repr(v) for k, v in sorted(d.params.items())},
    }
    return out


def serialize_config(cfg: RunConfig) -> str:
    buf = io.StringIO()
    for name, vals in serialize_sections(cfg).items():
        buf.write(f"[{name}]\n")
        for k, v in vals.items():
            buf.write(f"{k} = {v}\n")
        buf.write("\n")
    return buf.getvalue()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def defaults_help() -> str:
    """Every config key with its default, for ``--help``."""
    return "configuration keys and defaults:\n\n" + serialize_config(RunConfig())
