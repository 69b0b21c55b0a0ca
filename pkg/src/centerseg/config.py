"""Pipeline configuration shared by the library and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, fields

ALGORITHMS = ("dbscan", "dbscan-naive", "mean-shift")
FILTER_STRATEGIES = ("density", "offset-magnitude")


@dataclass
class PipelineConfig:
    """Knobs for the segmentation pipeline and its downstream consumers.

    Production defaults: vote filter radius t = 20 px, clustering radius
    eps = 2.5 px, cluster density floor min_pts = 50 votes, 7 frames/s.
    Synthetic desk-scale scenes typically need a smaller min_pts (the
    production value assumes full-resolution animals).
    """

    t: float = 20.0
    min_neighbors: int = 10
    filter_strategy: str = "density"
    eps: float = 2.5
    min_pts: int = 50
    rc2m: bool = True
    algo: str = "dbscan"
    bandwidth: float = 10.0
    ms_max_iter: int = 300
    shift_tol: float = 1e-3
    merge_radius: float | None = None
    min_iou: float = 0.0
    fps: float = 7.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.t <= 0:
            raise ValueError("t must be > 0")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        if self.filter_strategy not in FILTER_STRATEGIES:
            raise ValueError(f"filter_strategy must be one of {FILTER_STRATEGIES}")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"algo must be one of {ALGORITHMS}")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        if self.ms_max_iter < 1:
            raise ValueError("ms_max_iter must be >= 1")
        if self.shift_tol <= 0:
            raise ValueError("shift_tol must be > 0")
        if self.merge_radius is not None and self.merge_radius <= 0:
            raise ValueError("merge_radius must be > 0 when set")
        if self.min_iou < 0:
            raise ValueError("min_iou must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))
