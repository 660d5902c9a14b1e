"""Pipeline configuration: a flat YAML-like text format and its dataclass.

The accepted syntax is a deliberately small subset of YAML: ``key: value``
scalars at the top level, one level of two-space-indented sections, full-line
``#`` comments, and nothing else (no lists, anchors, or deeper nesting).
Scalars parse as bool (true/false), int, float, or string; double-quoted
strings survive verbatim.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .metrics import EvalProtocol
from .retrieval import QeParams, RerankParams
from .schedule import DEFAULT_FREEZE_ITERS, LrSchedule

__all__ = [
    "ConfigError",
    "ScheduleConfig",
    "PipelineConfig",
    "parse_flat_yaml",
    "dump_flat_yaml",
    "load_config",
    "save_config",
]

METRICS = ("euclidean", "cosine", "dsr")
POST_STEPS = ("qe", "rerank")


class ConfigError(ValueError):
    pass


def _parse_scalar(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_flat_yaml(text: str) -> dict:
    """Parse the flat config subset into a dict of scalars and scalar dicts."""
    root: dict = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        line = raw.strip()
        if ":" not in line:
            raise ConfigError(f"line {lineno}: expected 'key: value', got {line!r}")
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if indent == 0:
            if key in root:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if value:
                root[key] = _parse_scalar(value)
                section = None
            else:
                root[key] = {}
                section = key
        elif indent == 2:
            if section is None:
                raise ConfigError(f"line {lineno}: indented entry outside a section")
            if not value:
                raise ConfigError(f"line {lineno}: nesting deeper than one level")
            if key in root[section]:
                raise ConfigError(f"line {lineno}: duplicate key {key!r} in {section!r}")
            root[section][key] = _parse_scalar(value)
        else:
            raise ConfigError(f"line {lineno}: unsupported indentation of {indent}")
    return root


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        needs_quotes = value == "" or value != value.strip() or value.lower() in ("true", "false")
        if not needs_quotes:
            try:
                float(value)
                needs_quotes = True
            except ValueError:
                pass
        return f'"{value}"' if needs_quotes else value
    return str(value)


def dump_flat_yaml(data: dict) -> str:
    """Serialize a dict produced by parse_flat_yaml back to the flat format."""
    lines: list[str] = []
    for key in sorted(data):
        value = data[key]
        if isinstance(value, dict):
            lines.append(f"{key}:")
            for sub in sorted(value):
                lines.append(f"  {sub}: {_format_scalar(value[sub])}")
        else:
            lines.append(f"{key}: {_format_scalar(value)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScheduleConfig:
    """LrSchedule plus the freeze window and the dump stride."""

    schedule: LrSchedule = field(default_factory=LrSchedule)
    freeze_iters: int = DEFAULT_FREEZE_ITERS
    stride: int = 100

    def __post_init__(self):
        if self.freeze_iters < 0:
            raise ConfigError("freeze_iters must be >= 0")
        if self.stride < 1:
            raise ConfigError("stride must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    metric: str = "cosine"
    query_path: str = ""
    gallery_path: str = ""
    out_dir: str = "reid_out"
    seed: int = 0
    threads: int = 1
    post_order: tuple[str, ...] = ("qe", "rerank")
    qe: QeParams | None = None
    rerank: RerankParams | None = None
    protocol: EvalProtocol = field(default_factory=EvalProtocol)
    schedule: ScheduleConfig | None = None
    dsr_query_dir: str = ""
    dsr_gallery_dir: str = ""

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if any(step not in POST_STEPS for step in self.post_order):
            raise ConfigError(f"post_order entries must be among {POST_STEPS}")
        if len(set(self.post_order)) != len(self.post_order):
            raise ConfigError("post_order must not repeat steps")
        if self.metric == "dsr" and (self.qe is not None or self.rerank is not None):
            raise ConfigError("dsr operates on spatial sets; qe/rerank need flat embeddings")


def _build_section(data: dict, key: str) -> dict:
    value = data.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key!r} must be a section")
    return dict(value)


def config_from_dict(data: dict) -> PipelineConfig:
    known = {
        "metric", "query", "gallery", "out", "seed", "threads", "post_order",
        "qe", "rerank", "protocol", "schedule", "dsr",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs: dict = {}
    if "metric" in data:
        kwargs["metric"] = data["metric"]
    kwargs["query_path"] = str(data.get("query", ""))
    kwargs["gallery_path"] = str(data.get("gallery", ""))
    kwargs["out_dir"] = str(data.get("out", "reid_out"))
    kwargs["seed"] = int(data.get("seed", 0))
    kwargs["threads"] = int(data.get("threads", 1))
    order = data.get("post_order", "qe,rerank")
    kwargs["post_order"] = tuple(s.strip() for s in str(order).split(",") if s.strip())

    qe = _build_section(data, "qe")
    if qe:
        kwargs["qe"] = QeParams(m=int(qe.pop("m")), metric=qe.pop("metric", "cosine"))
        if qe:
            raise ConfigError(f"unknown qe keys: {sorted(qe)}")
    rr = _build_section(data, "rerank")
    if rr:
        kwargs["rerank"] = RerankParams(
            k1=int(rr.pop("k1", 20)), k2=int(rr.pop("k2", 6)), lam=float(rr.pop("lambda", 0.3))
        )
        if rr:
            raise ConfigError(f"unknown rerank keys: {sorted(rr)}")
    proto = _build_section(data, "protocol")
    if proto:
        kwargs["protocol"] = EvalProtocol(
            exclude_same_camera_same_id=bool(proto.pop("exclude_same_camera_same_id", True)),
            max_rank=int(proto.pop("max_rank", 10)),
        )
        if proto:
            raise ConfigError(f"unknown protocol keys: {sorted(proto)}")
    sched = _build_section(data, "schedule")
    if sched:
        lr = LrSchedule(
            warmup_start_lr=float(sched.pop("warmup_start_lr", 3.5e-5)),
            base_lr=float(sched.pop("base_lr", 3.5e-4)),
            final_lr=float(sched.pop("final_lr", 7.7e-7)),
            warmup_iters=int(sched.pop("warmup_iters", 2000)),
            plateau_end_iter=int(sched.pop("plateau_end_iter", 9000)),
            total_iters=int(sched.pop("total_iters", 18000)),
        )
        kwargs["schedule"] = ScheduleConfig(
            schedule=lr,
            freeze_iters=int(sched.pop("freeze_iters", DEFAULT_FREEZE_ITERS)),
            stride=int(sched.pop("stride", 100)),
        )
        if sched:
            raise ConfigError(f"unknown schedule keys: {sorted(sched)}")
    dsr = _build_section(data, "dsr")
    if dsr:
        kwargs["dsr_query_dir"] = str(dsr.pop("query_dir", ""))
        kwargs["dsr_gallery_dir"] = str(dsr.pop("gallery_dir", ""))
        if dsr:
            raise ConfigError(f"unknown dsr keys: {sorted(dsr)}")

    try:
        return PipelineConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: PipelineConfig) -> dict:
    data: dict = {
        "metric": cfg.metric,
        "out": cfg.out_dir,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "post_order": ",".join(cfg.post_order),
    }
    if cfg.query_path:
        data["query"] = cfg.query_path
    if cfg.gallery_path:
        data["gallery"] = cfg.gallery_path
    if cfg.qe is not None:
        data["qe"] = {"m": cfg.qe.m, "metric": cfg.qe.metric}
    if cfg.rerank is not None:
        data["rerank"] = {"k1": cfg.rerank.k1, "k2": cfg.rerank.k2, "lambda": cfg.rerank.lam}
    data["protocol"] = {
        "exclude_same_camera_same_id": cfg.protocol.exclude_same_camera_same_id,
        "max_rank": cfg.protocol.max_rank,
    }
    if cfg.schedule is not None:
        lr = cfg.schedule.schedule
        data["schedule"] = {
            "warmup_start_lr": lr.warmup_start_lr,
            "base_lr": lr.base_lr,
            "final_lr": lr.final_lr,
            "warmup_iters": lr.warmup_iters,
            "plateau_end_iter": lr.plateau_end_iter,
            "total_iters": lr.total_iters,
            "freeze_iters": cfg.schedule.freeze_iters,
            "stride": cfg.schedule.stride,
        }
    if cfg.dsr_query_dir or cfg.dsr_gallery_dir:
        data["dsr"] = {"query_dir": cfg.dsr_query_dir, "gallery_dir": cfg.dsr_gallery_dir}
    return data


def load_config(path) -> PipelineConfig:
    return config_from_dict(parse_flat_yaml(Path(path).read_text()))


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(dump_flat_yaml(config_to_dict(cfg)))
