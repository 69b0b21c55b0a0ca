"""Bit-exact file formats.

Binary maps:
  semantic map  magic "CCSM" | version byte 1 | u32le width | u32le height
                | width*height class bytes, row-major
  offset map    magic "CCOF" | version byte 1 | u32le width | u32le height
                | width*height (dx, dy) pairs of f32le, row-major

Text artifacts: instance manifests are single-line JSON with sorted keys
(masks as run-length counts), tracks and metrics are CSV, heat maps are
binary P5 graymaps with counts rescaled to 255 (raw counts go to a CSV
alongside), configs are flat key=value files where unknown keys are
errors.

Writers are deterministic: identical values produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .grids import GridDims, OffsetMap, SemanticMap, rle_decode, rle_encode
from .instances import Instance
from .synth import NoiseModel, SceneSpec
from .tracking import TrackMetrics

SEMANTIC_MAGIC = b"CCSM"
OFFSET_MAGIC = b"CCOF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<II")  # width, height after magic+version

TRACKS_HEADER = ["frame", "track_id", "class", "center_x", "center_y", "area", "paired_iou"]
METRICS_HEADER = ["track_id", "movement_px", "avg_speed_px_s", "body_pixel_size", "space_usage"]


class FormatError(ValueError):
    """A malformed input file, with the byte offset of the problem."""

    def __init__(self, path, offset: int, message: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: byte {offset}: {message}")


def _parse_header(data: bytes, magic: bytes, path) -> GridDims:
    if data[:4] != magic:
        raise FormatError(path, 0, f"bad magic {data[:4]!r}, expected {magic!r}")
    if len(data) < 5:
        raise FormatError(path, 4, "truncated before version byte")
    if data[4] != FORMAT_VERSION:
        raise FormatError(path, 4, f"unsupported version {data[4]}")
    if len(data) < 13:
        raise FormatError(path, 5, "truncated header")
    width, height = _HEADER.unpack_from(data, 5)
    if width < 1 or height < 1:
        raise FormatError(path, 5, f"bad dimensions {width}x{height}")
    return GridDims(width, height)


def semantic_to_bytes(sm: SemanticMap) -> bytes:
    head = SEMANTIC_MAGIC + bytes([FORMAT_VERSION]) + _HEADER.pack(sm.dims.width, sm.dims.height)
    return head + sm.labels.astype("|u1").tobytes()


def semantic_from_bytes(data: bytes, path="<memory>") -> SemanticMap:
    dims = _parse_header(data, SEMANTIC_MAGIC, path)
    expected = 13 + dims.npixels
    if len(data) != expected:
        raise FormatError(path, min(len(data), expected), f"payload is {len(data) - 13} bytes, expected {dims.npixels}")
    labels = np.frombuffer(data, dtype="|u1", offset=13).reshape(dims.shape)
    if labels.max(initial=0) > 2:
        bad = 13 + int(np.argmax(labels.ravel() > 2))
        raise FormatError(path, bad, "class byte outside {0, 1, 2}")
    return SemanticMap(dims, labels.copy())


def offsets_to_bytes(om: OffsetMap) -> bytes:
    head = OFFSET_MAGIC + bytes([FORMAT_VERSION]) + _HEADER.pack(om.dims.width, om.dims.height)
    return head + om.vectors.astype("<f4").tobytes()


def offsets_from_bytes(data: bytes, path="<memory>") -> OffsetMap:
    dims = _parse_header(data, OFFSET_MAGIC, path)
    expected = 13 + dims.npixels * 8
    if len(data) != expected:
        raise FormatError(
            path, min(len(data), expected),
            f"payload is {len(data) - 13} bytes, expected {dims.npixels * 8}",
        )
    vec = np.frombuffer(data, dtype="<f4", offset=13).reshape(*dims.shape, 2)
    if not np.all(np.isfinite(vec)):
        raise FormatError(path, 13, "non-finite offset component")
    return OffsetMap(dims, vec.copy())


def write_semantic(path, sm: SemanticMap) -> None:
    Path(path).write_bytes(semantic_to_bytes(sm))


def read_semantic(path) -> SemanticMap:
    return semantic_from_bytes(Path(path).read_bytes(), path)


def write_offsets(path, om: OffsetMap) -> None:
    Path(path).write_bytes(offsets_to_bytes(om))


def read_offsets(path) -> OffsetMap:
    return offsets_from_bytes(Path(path).read_bytes(), path)


def manifest_dumps(frame_id: int, dims: GridDims, instances: list[Instance]) -> str:
    doc = {
        "frame": frame_id,
        "width": dims.width,
        "height": dims.height,
        "instances": [
            {
                "class": inst.cls,
                "score": inst.score,
                "predicted_center": [inst.predicted_center[0], inst.predicted_center[1]],
                "rle": rle_encode(inst.mask),
            }
            for inst in instances
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def manifest_loads(text: str, path="<memory>") -> tuple[int, GridDims, list[Instance]]:
    try:
        doc = json.loads(text)
        dims = GridDims(int(doc["width"]), int(doc["height"]))
        frame_id = int(doc["frame"])
        instances = [
            Instance(
                mask=rle_decode(entry["rle"], dims),
                predicted_center=(float(entry["predicted_center"][0]), float(entry["predicted_center"][1])),
                cls=entry["class"],
                score=float(entry["score"]),
            )
            for entry in doc["instances"]
        ]
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        offset = getattr(exc, "pos", 0)
        raise FormatError(path, offset, f"bad instance manifest: {exc}") from exc
    return frame_id, dims, instances


def write_manifest(path, frame_id: int, dims: GridDims, instances: list[Instance]) -> None:
    Path(path).write_text(manifest_dumps(frame_id, dims, instances))


def read_manifest(path) -> tuple[int, GridDims, list[Instance]]:
    return manifest_loads(Path(path).read_text(), path)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def tracks_csv_dumps(rows: list[tuple]) -> str:
    lines = [",".join(TRACKS_HEADER)]
    for frame, tid, cls, cx, cy, area, iou in rows:
        lines.append(
            ",".join([_fmt(frame), _fmt(tid), cls, _fmt(float(cx)), _fmt(float(cy)), _fmt(area), _fmt(iou if iou is None else float(iou))])
        )
    return "\n".join(lines) + "\n"


def tracks_csv_loads(text: str, path="<memory>") -> list[tuple]:
    lines = text.splitlines()
    if not lines or lines[0].split(",") != TRACKS_HEADER:
        raise FormatError(path, 0, "bad tracks header")
    rows = []
    for ln in lines[1:]:
        frame, tid, cls, cx, cy, area, iou = ln.split(",")
        rows.append(
            (int(frame), int(tid), cls, float(cx), float(cy), int(area), None if iou == "" else float(iou))
        )
    return rows


def metrics_csv_dumps(metrics: list[TrackMetrics]) -> str:
    lines = [",".join(METRICS_HEADER)]
    for m in metrics:
        lines.append(
            ",".join([
                str(m.track_id), repr(float(m.movement_px)), repr(float(m.avg_speed_px_s)),
                repr(float(m.body_pixel_size)), repr(float(m.space_usage)),
            ])
        )
    return "\n".join(lines) + "\n"


def metrics_csv_loads(text: str, path="<memory>") -> list[tuple]:
    lines = text.splitlines()
    if not lines or lines[0].split(",") != METRICS_HEADER:
        raise FormatError(path, 0, "bad metrics header")
    rows = []
    for ln in lines[1:]:
        tid, movement, speed, body, space = ln.split(",")
        rows.append((int(tid), float(movement), float(speed), float(body), float(space)))
    return rows


def heatmap_pgm_bytes(counts: np.ndarray) -> bytes:
    """Binary P5 graymap of visit counts, linearly rescaled to max 255."""
    counts = np.asarray(counts)
    h, w = counts.shape
    peak = int(counts.max()) if counts.size else 0
    if peak > 0:
        scaled = np.rint(counts.astype(np.float64) * (255.0 / peak)).astype(np.uint8)
    else:
        scaled = np.zeros_like(counts, dtype=np.uint8)
    return f"P5\n{w} {h}\n255\n".encode() + scaled.tobytes()


def counts_csv_dumps(counts: np.ndarray) -> str:
    return "\n".join(",".join(str(int(v)) for v in row) for row in np.asarray(counts)) + "\n"


# --- flat key=value config files -------------------------------------------

_CONFIG_BOOL_KEYS = {"rc2m"}


def _kv_parse(text: str, path) -> dict[str, str]:
    out: dict[str, str] = {}
    offset = 0
    for line in text.splitlines(keepends=True):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            if "=" not in stripped:
                raise FormatError(path, offset, f"expected key=value, got {stripped!r}")
            key, value = stripped.split("=", 1)
            out[key.strip()] = value.strip()
        offset += len(line)
    return out


def _parse_bool(value: str, key: str, path) -> bool:
    if value in ("on", "true", "1"):
        return True
    if value in ("off", "false", "0"):
        return False
    raise FormatError(path, 0, f"{key} must be on or off, got {value!r}")


def config_dumps(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(PipelineConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name in _CONFIG_BOOL_KEYS:
            value = "on" if value else "off"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def config_loads(text: str, path="<config>") -> PipelineConfig:
    raw = _kv_parse(text, path)
    known = {f.name: f for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise FormatError(path, 0, f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _CONFIG_BOOL_KEYS:
            kwargs[key] = _parse_bool(value, key, path)
        elif key in ("min_neighbors", "min_pts", "ms_max_iter", "seed"):
            kwargs[key] = int(value)
        elif key in ("filter_strategy", "algo"):
            kwargs[key] = value
        else:
            kwargs[key] = float(value)
    try:
        return PipelineConfig(**kwargs)
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from exc


def read_config(path) -> PipelineConfig:
    return config_loads(Path(path).read_text(), path)


def write_config(path, cfg: PipelineConfig) -> None:
    Path(path).write_text(config_dumps(cfg))


# --- scene spec files -------------------------------------------------------

_SCENE_INT_KEYS = {
    "width", "height", "n_piglets", "seed", "n_random_occluders",
    "min_visible_area", "sow_min_visible_area",
}
_SCENE_FLOAT_KEYS = {
    "piglet_a_min", "piglet_a_max", "piglet_b_min", "piglet_b_max",
    "sow_half_length", "sow_radius", "occluder_width_min", "occluder_width_max",
    "max_speed", "min_center_separation", "flip_rate", "offset_sigma",
}
_SCENE_BOOL_KEYS = {"sow"}


def scene_spec_loads(text: str, path="<scene>") -> SceneSpec:
    raw = _kv_parse(text, path)
    allowed = _SCENE_INT_KEYS | _SCENE_FLOAT_KEYS | _SCENE_BOOL_KEYS
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise FormatError(path, 0, f"unknown scene keys: {', '.join(unknown)}")
    for required in ("width", "height", "n_piglets"):
        if required not in raw:
            raise FormatError(path, 0, f"missing scene key: {required}")
    vals: dict[str, object] = {}
    for key, value in raw.items():
        if key in _SCENE_INT_KEYS:
            vals[key] = int(value)
        elif key in _SCENE_BOOL_KEYS:
            vals[key] = _parse_bool(value, key, path)
        else:
            vals[key] = float(value)

    def pick(name, default):
        return vals.get(name, default)

    dims = GridDims(vals["width"], vals["height"])
    defaults = SceneSpec(dims=dims, n_piglets=0)
    try:
        return SceneSpec(
            dims=dims,
            n_piglets=vals["n_piglets"],
            seed=pick("seed", 0),
            piglet_a=(pick("piglet_a_min", defaults.piglet_a[0]), pick("piglet_a_max", defaults.piglet_a[1])),
            piglet_b=(pick("piglet_b_min", defaults.piglet_b[0]), pick("piglet_b_max", defaults.piglet_b[1])),
            sow=pick("sow", defaults.sow),
            sow_half_length=pick("sow_half_length", defaults.sow_half_length),
            sow_radius=pick("sow_radius", defaults.sow_radius),
            sow_min_visible_area=pick("sow_min_visible_area", defaults.sow_min_visible_area),
            n_random_occluders=pick("n_random_occluders", 0),
            occluder_width=(
                pick("occluder_width_min", defaults.occluder_width[0]),
                pick("occluder_width_max", defaults.occluder_width[1]),
            ),
            max_speed=pick("max_speed", 0.0),
            min_visible_area=pick("min_visible_area", defaults.min_visible_area),
            min_center_separation=pick("min_center_separation", defaults.min_center_separation),
            noise=NoiseModel(
                flip_rate=pick("flip_rate", 0.0),
                offset_sigma=pick("offset_sigma", 0.0),
            ),
        )
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from exc


def read_scene_spec(path) -> SceneSpec:
    return scene_spec_loads(Path(path).read_text(), path)
