"""Point files, manifests, sampling, stratified splits and synthetic vessels.

Point file: UTF-8 text, one point per line as ``x y z nx ny nz`` with an
optional trailing integer label. Blank lines and ``#`` comments are
skipped. A manifest lists one relative point-file path and an integer
class label per line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError
from .pointops import PointCloud

HEALTHY, ANEURYSM = 0, 1


@dataclass
class Sample:
    cloud: PointCloud
    label: int
    source: str = ""


@dataclass
class Dataset:
    samples: list[Sample]
    name: str = "dataset"
    manifest_path: Path | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, i) -> Sample:
        return self.samples[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], name or self.name, self.manifest_path)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    labeled_fraction: float = 1.0
    seed: int = 0
    folds: int = 1
    fold: int = 0

    def __post_init__(self):
        for key in ("test_fraction", "labeled_fraction"):
            value = getattr(self, key)
            if not 0 < value <= 1:
                raise ValueError(f"{key} must lie in (0, 1], got {value}")
        if self.folds < 1 or not 0 <= self.fold < self.folds:
            raise ValueError(f"fold {self.fold} is not one of {self.folds} folds")


# ---------------------------------------------------------------- I/O

def parse_cloud(text: str, path="<string>") -> PointCloud:
    rows, labels = [], []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (6, 7):
            raise ParseError(path, lineno, f"expected 6 or 7 fields, got {len(tokens)}")
        if width is not None and len(tokens) != width:
            raise ParseError(path, lineno, f"expected {width} fields like the preceding lines, got {len(tokens)}")
        width = len(tokens)
        try:
            rows.append([float(t) for t in tokens[:6]])
            if width == 7:
                labels.append(int(tokens[6]))
        except ValueError as exc:
            raise ParseError(path, lineno, f"non-numeric token ({exc})") from None
    if not rows:
        raise ParseError(path, 0, "file contains no points")
    feats = np.array(rows)
    if not np.all(np.isfinite(feats)):
        raise ParseError(path, 0, "non-finite coordinate or normal")
    return PointCloud.from_features(feats, labels if width == 7 else None)


def load_cloud(path) -> PointCloud:
    path = Path(path)
    return parse_cloud(path.read_text(encoding="utf-8"), path)


def format_cloud(cloud: PointCloud) -> str:
    feats = cloud.features
    lines = []
    for i, row in enumerate(feats):
        fields = [f"{v:.9g}" for v in row]
        if cloud.labels is not None:
            fields.append(str(int(cloud.labels[i])))
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def write_cloud(cloud: PointCloud, path) -> None:
    Path(path).write_text(format_cloud(cloud), encoding="utf-8")


def load_manifest(path, name: str | None = None) -> Dataset:
    path = Path(path)
    samples = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(path, lineno, "expected '<relative path> <class label>'")
        try:
            label = int(parts[1])
        except ValueError:
            raise ParseError(path, lineno, f"class label {parts[1]!r} is not an integer") from None
        samples.append(Sample(load_cloud(path.parent / parts[0]), label, parts[0]))
    if not samples:
        raise ParseError(path, 0, "manifest lists no samples")
    return Dataset(samples, name or path.stem, path)


def write_dataset(dataset: Dataset, directory) -> Path:
    directory = Path(directory)
    (directory / "clouds").mkdir(parents=True, exist_ok=True)
    lines = []
    for i, sample in enumerate(dataset.samples):
        rel = f"clouds/{i:05d}.txt"
        write_cloud(sample.cloud, directory / rel)
        lines.append(f"{rel} {sample.label}")
    manifest = directory / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


# ---------------------------------------------------------------- sampling / splits

def sample_points(cloud: PointCloud, count: int, rng: np.random.Generator) -> PointCloud:
    """Uniform subsample; above ``n`` every point is kept and the rest drawn with replacement."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    n = cloud.n
    if count <= n:
        idx = rng.choice(n, size=count, replace=False)
    else:
        idx = np.concatenate([rng.permutation(n), rng.integers(0, n, size=count - n)])
    return cloud.take(idx)


def stratified_counts(class_sizes: dict[int, int], fraction: float) -> dict[int, int]:
    """Per-class share of ``fraction``: floors per class, leftover to the largest class."""
    total = sum(class_sizes.values())
    target = math.floor(total * fraction + 1e-9)
    counts = {c: math.floor(size * fraction + 1e-9) for c, size in class_sizes.items()}
    largest = max(class_sizes, key=lambda c: (class_sizes[c], -c))
    counts[largest] += target - sum(counts.values())
    return counts


def _stratified_take(labels: np.ndarray, pool: np.ndarray, fraction: float, rng, part: str):
    classes = sorted(set(labels[pool].tolist()))
    sizes = {c: int(np.sum(labels[pool] == c)) for c in classes}
    counts = stratified_counts(sizes, fraction)
    taken, rest = [], []
    for c in classes:
        members = pool[labels[pool] == c]
        members = members[rng.permutation(len(members))]
        if counts[c] == 0:
            raise ValueError(f"class {c} would have no samples in the {part} part")
        taken.append(members[:counts[c]])
        rest.append(members[counts[c]:])
    return np.sort(np.concatenate(taken)), np.sort(np.concatenate(rest))


def split_dataset(dataset: Dataset | np.ndarray, spec: SplitSpec):
    """Index arrays ``(unlabeled A, labeled B, test)``.

    The test part is held out first; the remainder splits into A and B by
    ``labeled_fraction``. Both cuts are stratified by class. With
    ``folds > 1`` the test part is fold ``fold`` of a stratified k-fold
    assignment and ``test_fraction`` is ignored.
    """
    labels = dataset.labels if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 0x5B17])))
    everything = np.arange(len(labels))
    if spec.folds > 1:
        test = kfold_indices(labels, spec.folds, spec.seed)[spec.fold]
        remainder = np.setdiff1d(everything, test)
    else:
        test, remainder = _stratified_take(labels, everything, spec.test_fraction, rng, "test")
    unlabeled, labeled = _split_remainder(labels, remainder, spec, rng)
    return unlabeled, labeled, test


def _split_remainder(labels, remainder, spec: SplitSpec, rng):
    if spec.labeled_fraction >= 1.0:
        return np.array([], dtype=np.int64), remainder
    labeled, unlabeled = _stratified_take(labels, remainder, spec.labeled_fraction, rng, "labeled")
    return unlabeled, labeled


def split_pool(dataset: Dataset | np.ndarray, spec: SplitSpec):
    """Index arrays ``(unlabeled A, labeled B)`` when the test set lives elsewhere."""
    labels = dataset.labels if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 0xB001])))
    return _split_remainder(labels, np.arange(len(labels)), spec, rng)


def kfold_indices(labels, folds: int, seed: int = 0) -> list[np.ndarray]:
    """Stratified fold assignment for full reproduction runs."""
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xF01D])))
    out = [[] for _ in range(folds)]
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        for i, idx in enumerate(members):
            out[i % folds].append(idx)
    return [np.sort(np.array(f, dtype=np.int64)) for f in out]


# ---------------------------------------------------------------- synthetic vessels

@dataclass(frozen=True)
class SyntheticSpec:
    healthy: int = 8
    aneurysm: int = 8
    points: int = 256
    bump_fraction: float = 0.3
    noise: float = 0.01


def _cylinder(count, radius, length, rng, noise, avoid=None):
    """Points on the side of a Y-aligned cylinder, outward radial normals."""
    pts, nrm = [], []
    need = count
    while need > 0:
        phi = rng.uniform(0, 2 * np.pi, size=need)
        y = rng.uniform(-length / 2, length / 2, size=need)
        r = radius + rng.normal(0, noise, size=need)
        p = np.stack([r * np.cos(phi), y, r * np.sin(phi)], axis=1)
        n = np.stack([np.cos(phi), np.zeros(need), np.sin(phi)], axis=1)
        if avoid is not None:
            center, rad = avoid
            keep = np.linalg.norm(p - center, axis=1) > rad
            p, n = p[keep], n[keep]
        pts.append(p)
        nrm.append(n)
        need -= len(p)
    return np.concatenate(pts)[:count], np.concatenate(nrm)[:count]


def _hemisphere(count, center, outward, radius, rng):
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    flip = v @ outward < 0
    v[flip] -= 2 * np.outer(v[flip] @ outward, outward)
    return center + radius * v, v


def synthetic_cloud(aneurysm: bool, points: int, bump_fraction: float, rng, noise: float = 0.01) -> PointCloud:
    radius = rng.uniform(0.8, 1.2)
    length = rng.uniform(4.0, 6.0)
    if not aneurysm:
        p, n = _cylinder(points, radius, length, rng, noise)
        return PointCloud(p, n, np.zeros(points, dtype=np.int64))
    on_bump = rng.random(points) < bump_fraction
    k = int(on_bump.sum())
    phi = rng.uniform(0, 2 * np.pi)
    y0 = rng.uniform(-length / 4, length / 4)
    outward = np.array([np.cos(phi), 0.0, np.sin(phi)])
    center = np.array([radius * np.cos(phi), y0, radius * np.sin(phi)])
    bump_radius = rng.uniform(0.6, 0.9) * radius
    coords = np.empty((points, 3))
    normals = np.empty((points, 3))
    coords[on_bump], normals[on_bump] = _hemisphere(k, center, outward, bump_radius, rng)
    coords[~on_bump], normals[~on_bump] = _cylinder(points - k, radius, length, rng, noise,
                                                    avoid=(center, bump_radius))
    return PointCloud(coords, normals, on_bump.astype(np.int64))


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator, name: str = "synthetic") -> Dataset:
    """Healthy cylinders and cylinders with a labeled hemispherical bump.

    Classes alternate (healthy first) until one count is exhausted.
    """
    if spec.healthy < 0 or spec.aneurysm < 0 or spec.healthy + spec.aneurysm < 1 or spec.points < 1:
        raise ValueError("need at least one cloud and one point per cloud")
    order = []
    h, a = spec.healthy, spec.aneurysm
    while h or a:
        if h:
            order.append(HEALTHY)
            h -= 1
        if a:
            order.append(ANEURYSM)
            a -= 1
    samples = []
    for i, label in enumerate(order):
        cloud = synthetic_cloud(label == ANEURYSM, spec.points, spec.bump_fraction, rng, spec.noise)
        samples.append(Sample(cloud, label, f"synthetic/{i:05d}"))
    return Dataset(samples, name)
