"""Dual-branch encoders and the shared projection heads.

Branch 1 is a per-point MLP followed by max-pooling over points. Branch 2
is hierarchical: each abstraction level samples centroids by farthest-point
sampling, groups their nearest neighbors, runs a shared MLP over every
group and max-pools within the group. The last level pools all remaining
points into one vector. The segmentation variant of branch 2 adds feature
propagation back to the input points.

Everything works on batches: inputs are ``(B, n, 6)`` arrays of
coordinates followed by normals.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .diffcore import MLP, Module, Tensor, ops
from .diffcore.layers import init_rng
from .errors import DimensionError
from .pointops import PointCloud, farthest_point_sample, interpolation_weights, knn_indices

REPRESENTATION_WIDTH = 1024


@dataclass(frozen=True)
class AbstractionLevelConfig:
    n1: int | None
    k: int | None
    mlp_widths: tuple[int, ...]


@dataclass(frozen=True)
class SegPropagationConfig:
    level_widths: tuple[tuple[int, ...], ...] = ((256, 256), (256, 128), (128, 128))
    unit_widths: tuple[int, ...] = (512, 1024)


@dataclass(frozen=True)
class EncoderConfig:
    branch1_widths: tuple[int, ...] = (64, 128, 1024)
    levels: tuple[AbstractionLevelConfig, ...] = (
        AbstractionLevelConfig(512, 32, (64, 64, 128)),
        AbstractionLevelConfig(128, 64, (128, 128, 256)),
        AbstractionLevelConfig(None, None, (256, 512, 1024)),
    )
    propagation: SegPropagationConfig = field(default_factory=SegPropagationConfig)
    proj_cls_widths: tuple[int, ...] = (512, 256, 128)
    proj_seg_widths: tuple[int, ...] = (1024, 512)

    @property
    def rep_width(self) -> int:
        return self.branch1_widths[-1]

    def validate(self) -> None:
        if self.levels[-1].k is not None or self.levels[-1].n1 is not None:
            raise ValueError("the final abstraction level must group all points (n1=None, k=None)")
        if any(lv.n1 is None or lv.k is None for lv in self.levels[:-1]):
            raise ValueError("only the final abstraction level may group all points")
        if self.levels[-1].mlp_widths[-1] != self.rep_width:
            raise DimensionError("levels", "branch 2 must end at the same width as branch 1")
        if self.propagation.unit_widths[-1] != self.rep_width:
            raise DimensionError("propagation", "unit pointnet must emit the representation width")
        if len(self.propagation.level_widths) != len(self.levels):
            raise ValueError("need one propagation level per abstraction level")

    def with_points(self, points: int) -> "EncoderConfig":
        """Scale centroid counts with the sampled point count (1024 -> 512, 128)."""
        levels = list(self.levels)
        out = []
        for lv, frac in zip(levels[:-1], (2, 8)):
            out.append(replace(lv, n1=max(1, points // frac)))
        out.extend(levels[len(out):])
        return replace(self, levels=tuple(out))


def standard_config(points: int = 1024) -> EncoderConfig:
    cfg = EncoderConfig().with_points(points)
    cfg.validate()
    if cfg.rep_width != REPRESENTATION_WIDTH:
        raise DimensionError("branch1_widths", "standard representation width is 1024")
    return cfg


def tiny_config(widths: int = 8, n1=(8, 4), k=(4, 4)) -> EncoderConfig:
    """Reduced widths for gradient checks and quick tests."""
    w = widths
    cfg = EncoderConfig(
        branch1_widths=(w, w, 2 * w),
        levels=(
            AbstractionLevelConfig(n1[0], k[0], (w, w)),
            AbstractionLevelConfig(n1[1], k[1], (w, w)),
            AbstractionLevelConfig(None, None, (w, 2 * w)),
        ),
        propagation=SegPropagationConfig(((w,), (w,), (w,)), (w, 2 * w)),
        proj_cls_widths=(w, w),
        proj_seg_widths=(w, w),
    )
    cfg.validate()
    return cfg


def _as_batch(x) -> np.ndarray:
    if isinstance(x, PointCloud):
        x = x.features[None]
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != 6:
        raise DimensionError("cloud", f"expected (B, n, 6) point features, got shape {x.shape}")
    if x.shape[1] < 1:
        raise DimensionError("cloud", "need at least one point")
    return x


# ---------------------------------------------------------------- branch 1

class GlobalBranch(Module):
    """Per-point MLP then max-pool."""

    def __init__(self, widths, rng, dtype=np.float64):
        self.mlp = MLP(6, widths, rng, dtype=dtype)

    def children(self):
        yield from self.mlp.children()

    def point_features(self, x) -> Tensor:
        x = _as_batch(x)
        return self.mlp(Tensor(x, dtype=self.mlp.layers[0].weight.dtype))

    def __call__(self, x) -> Tensor:
        pooled, _ = ops.max_pool(self.point_features(x), axis=-2)
        return pooled

    def segment_features(self, x) -> tuple[Tensor, Tensor]:
        """``(per_point (B, n, 2w), pooled (B, 2w))`` with the global half broadcast."""
        feats = self.point_features(x)
        glob, _ = ops.max_pool(feats, axis=-2)
        per_point = _with_global(feats, glob)
        pooled, _ = ops.max_pool(per_point, axis=-2)
        return per_point, pooled


def _with_global(per_point: Tensor, glob: Tensor) -> Tensor:
    b, n, c = per_point.shape
    tiled = ops.broadcast_to(ops.reshape(glob, (b, 1, glob.shape[-1])), (b, n, glob.shape[-1]))
    return ops.concat([per_point, tiled], axis=-1)


# ---------------------------------------------------------------- branch 2

@dataclass
class LevelOutput:
    coords: np.ndarray            # (B, m, 3)
    normals: np.ndarray           # (B, m, 3)
    features: Tensor | None       # (B, m, c)
    centroid_indices: np.ndarray | None = None
    group_indices: np.ndarray | None = None


class HierarchicalBranch(Module):
    """Stacked set-abstraction levels, with optional feature propagation."""

    def __init__(self, config: EncoderConfig, rng, dtype=np.float64, segmentation: bool = False):
        self.config = config
        self.dtype = dtype
        self.sa: list[MLP] = []
        prev = 0
        for lv in config.levels:
            mlp = MLP(6 + prev, lv.mlp_widths, rng, dtype=dtype)
            self.sa.append(mlp)
            prev = mlp.c_out
        self.segmentation = segmentation
        self.fp: list[MLP] = []
        self.unit: MLP | None = None
        if segmentation:
            level_out = [mlp.c_out for mlp in self.sa]
            skips = [6] + level_out[:-1]  # skip features at level 0 are the raw 6D input
            carried = level_out[-1]
            for i, widths in enumerate(config.propagation.level_widths):
                target = len(skips) - 1 - i
                mlp = MLP(carried + skips[target], widths, rng, dtype=dtype)
                self.fp.append(mlp)
                carried = mlp.c_out
            self.unit = MLP(carried, config.propagation.unit_widths, rng, dtype=dtype)

    def children(self):
        for i, mlp in enumerate(self.sa):
            yield f"sa{i + 1}", mlp
        for i, mlp in enumerate(self.fp):
            yield f"fp{i + 1}", mlp
        if self.unit is not None:
            yield "unit", self.unit

    def abstract(self, x) -> list[LevelOutput]:
        x = _as_batch(x)
        batch, n, _ = x.shape
        levels = [LevelOutput(x[..., :3], x[..., 3:], None)]
        for lv, mlp in zip(self.config.levels, self.sa):
            prev = levels[-1]
            m = prev.coords.shape[1]
            if lv.k is None:
                gidx = np.broadcast_to(np.arange(m), (batch, 1, m))
                cidx = None
                centroids = np.zeros((batch, 1, 3))
                new_coords, new_normals = centroids, np.zeros((batch, 1, 3))
            else:
                if lv.n1 > m:
                    raise DimensionError("cloud", f"level needs {lv.n1} centroids but only {m} points remain")
                cidx = np.stack([farthest_point_sample(prev.coords[b], lv.n1) for b in range(batch)])
                centroids = np.take_along_axis(prev.coords, cidx[..., None], axis=1)
                gidx = np.stack([knn_indices(prev.coords[b], centroids[b], lv.k) for b in range(batch)])
                new_coords = centroids
                new_normals = np.take_along_axis(prev.normals, cidx[..., None], axis=1)
            bidx = np.arange(batch)[:, None, None]
            local = prev.coords[bidx, gidx] - centroids[:, :, None, :]
            parts = [Tensor(np.concatenate([local, prev.normals[bidx, gidx]], axis=-1), dtype=self.dtype)]
            if prev.features is not None:
                parts.append(ops.gather(prev.features, gidx))
            grouped = ops.concat(parts, axis=-1)
            feats, _ = ops.max_pool(mlp(grouped), axis=-2)
            levels.append(LevelOutput(new_coords, new_normals, feats, cidx, gidx))
        return levels

    def __call__(self, x) -> Tensor:
        top = self.abstract(x)[-1].features
        return ops.reshape(top, (top.shape[0], top.shape[-1]))

    def segment_features(self, x) -> tuple[Tensor, Tensor]:
        if not self.segmentation:
            raise RuntimeError("branch was built without propagation levels")
        x = _as_batch(x)
        levels = self.abstract(x)
        glob = levels[-1].features
        carried = glob
        for i, mlp in enumerate(self.fp):
            src, dst = levels[-1 - i], levels[-2 - i]
            interp = _interpolate(src.coords, carried, dst.coords)
            skip = dst.features if dst.features is not None else Tensor(x, dtype=self.dtype)
            carried = mlp(ops.concat([interp, skip], axis=-1))
        propagated = self.unit(carried)
        flat_glob = ops.reshape(glob, (glob.shape[0], glob.shape[-1]))
        per_point = _with_global(propagated, flat_glob)
        pooled, _ = ops.max_pool(per_point, axis=-2)
        return per_point, pooled


def _interpolate(src_coords: np.ndarray, src_feats: Tensor, dst_coords: np.ndarray) -> Tensor:
    batch = src_coords.shape[0]
    pairs = [interpolation_weights(src_coords[b], dst_coords[b]) for b in range(batch)]
    idx = np.stack([p[0] for p in pairs])
    w = np.stack([p[1] for p in pairs]).astype(src_feats.dtype)
    gathered = ops.gather(src_feats, idx)
    return ops.sum(ops.mul(gathered, w[..., None]), axis=-2)


# ---------------------------------------------------------------- projection + dual

class ProjectionHead(MLP):
    def __init__(self, c_in: int, widths, rng, dtype=np.float64):
        super().__init__(c_in, widths, rng, final_plain=True, dtype=dtype,
                         names=[f"fc{i + 1}" for i in range(len(widths))])


def project(h, head: ProjectionHead) -> Tensor:
    h = h if isinstance(h, Tensor) else Tensor(h, dtype=head.layers[0].weight.dtype)
    if h.shape[-1] != head.layers[0].c_in:
        raise DimensionError("h", f"projection head expects width {head.layers[0].c_in}, got {h.shape[-1]}")
    return head(h)


ENCODER_MODES = ("dual", "single_pn", "single_pn2")


class DualEncoder(Module):
    """Both branches plus the shared projection head for one task.

    ``mode`` selects the dual layout or a single-encoder ablation in which
    both views go through the same branch.
    """

    def __init__(self, task: str = "cls", config: EncoderConfig | None = None, *, mode: str = "dual",
                 seed: int = 0, dtype=np.float64):
        if task not in ("cls", "seg"):
            raise ValueError(f"task must be 'cls' or 'seg', got {task!r}")
        if mode not in ENCODER_MODES:
            raise ValueError(f"mode must be one of {ENCODER_MODES}, got {mode!r}")
        self.task, self.mode, self.dtype = task, mode, dtype
        self.config = config or standard_config()
        self.config.validate()
        seg = task == "seg"
        self.branch1 = GlobalBranch(self.config.branch1_widths, init_rng(seed, "branch1"), dtype) \
            if mode != "single_pn2" else None
        self.branch2 = HierarchicalBranch(self.config, init_rng(seed, "branch2"), dtype, segmentation=seg) \
            if mode != "single_pn" else None
        width = self.config.rep_width * (2 if seg else 1)
        widths = self.config.proj_seg_widths if seg else self.config.proj_cls_widths
        self.proj = ProjectionHead(width, widths, init_rng(seed, "proj"), dtype)

    def children(self):
        for key in ("branch1", "branch2", "proj"):
            child = getattr(self, key)
            if child is not None:
                yield key, child

    @property
    def embedding_width(self) -> int:
        return self.proj.c_out

    @property
    def representation_width(self) -> int:
        branches = 2 if self.mode == "dual" else 1
        return branches * self.config.rep_width * (2 if self.task == "seg" else 1)

    def _branches(self):
        if self.mode == "dual":
            return self.branch1, self.branch2
        only = self.branch1 if self.mode == "single_pn" else self.branch2
        return only, only

    def _encode(self, branch, x) -> Tensor:
        if self.task == "cls":
            return branch(x)
        return branch.segment_features(x)[1]

    def embed_pairs(self, views_a, views_b) -> Tensor:
        """Embeddings of N pairs as a ``2N x dz`` tensor in interleaved order.

        Row ``2k`` comes from ``views_a[k]`` through branch 1 and row
        ``2k + 1`` from ``views_b[k]`` through branch 2.
        """
        a, b = _as_batch(views_a), _as_batch(views_b)
        if a.shape[0] != b.shape[0]:
            raise DimensionError("views_b", "both view batches need the same size")
        first, second = self._branches()
        h = ops.concat([self._encode(first, a), self._encode(second, b)], axis=0)
        z = project(h, self.proj)
        n = a.shape[0]
        order = np.empty(2 * n, dtype=np.int64)
        order[0::2] = np.arange(n)
        order[1::2] = np.arange(n) + n
        return ops.index(z, order)

    def represent(self, x) -> np.ndarray:
        """Frozen downstream features of a batch: ``(B, 2w)`` or ``(B, n, 4w)``."""
        x = _as_batch(x)
        first, second = self._branches()
        if self.mode != "dual":
            if self.task == "cls":
                return first(x).values.copy()
            return first.segment_features(x)[0].values.copy()
        if self.task == "cls":
            return np.concatenate([first(x).values, second(x).values], axis=-1)
        return np.concatenate([first.segment_features(x)[0].values,
                               second.segment_features(x)[0].values], axis=-1)


# ---------------------------------------------------------------- single-cloud helpers

def encode_cls_branch1(cloud, branch: GlobalBranch) -> np.ndarray:
    return branch(cloud).values[0]


def encode_cls_branch2(cloud, branch: HierarchicalBranch) -> np.ndarray:
    return branch(cloud).values[0]


def encode_seg_branch1(cloud, branch: GlobalBranch) -> tuple[np.ndarray, np.ndarray]:
    per_point, pooled = branch.segment_features(cloud)
    return per_point.values[0], pooled.values[0]


def encode_seg_branch2(cloud, branch: HierarchicalBranch) -> tuple[np.ndarray, np.ndarray]:
    per_point, pooled = branch.segment_features(cloud)
    return per_point.values[0], pooled.values[0]
