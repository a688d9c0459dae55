"""Datasets of identity-tagged face images and training-pair sampling.

A dataset is a directory with a ``manifest.json`` mapping identity tags to
image paths plus train/val split lists. Training alternates between
same-identity and different-identity image pairs: even steps draw two
images of one person, odd steps draw images of two people.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from faceveil.errors import ConfigError, ShapeError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def image_to_tensor(arr: np.ndarray) -> torch.Tensor:
    """uint8 HWC image -> float32 CHW tensor in [-1, 1]."""
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"expected HxWx3 uint8 image, got shape {arr.shape}")
    t = torch.from_numpy(arr.astype(np.float32) / 127.5 - 1.0)
    return t.permute(2, 0, 1).contiguous()


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """float CHW tensor in [-1, 1] -> uint8 HWC image (deterministic rounding)."""
    if t.ndim != 3 or t.shape[0] != 3:
        raise ShapeError(f"expected 3xHxW tensor, got shape {tuple(t.shape)}")
    arr = t.detach().cpu().numpy()
    arr = np.clip((arr + 1.0) * 127.5, 0.0, 255.0)
    return np.round(arr).astype(np.uint8).transpose(1, 2, 0)


def load_image(path: str | Path) -> torch.Tensor:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return image_to_tensor(arr)


def save_image(t: torch.Tensor, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(tensor_to_image(t)).save(path, format="PNG")


def png_bytes(t: torch.Tensor) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(tensor_to_image(t)).save(buf, format="PNG")
    return buf.getvalue()


@dataclass(frozen=True)
class PairLabel:
    """c = 1 for a same-identity pair, 0 for a different-identity pair."""

    c: int

    def __post_init__(self):
        if self.c not in (0, 1):
            raise ConfigError(f"pair label must be 0 or 1, got {self.c}")


@dataclass
class TrainingPair:
    """One training batch: x provides content, y provides identity."""

    x: torch.Tensor
    y: torch.Tensor
    label: PairLabel
    x_ids: list[str]
    y_ids: list[str]


class IdentityDataset:
    """Images grouped by identity tag, with identity-disjoint train/val splits.

    Train identities need at least two images each so same-identity pairs
    exist. Images are cached in memory as uint8 and converted on access.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.exists():
            raise ConfigError(f"no {MANIFEST_NAME} under {self.root}")
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("version") != MANIFEST_VERSION:
            raise ConfigError(
                f"manifest version {manifest.get('version')} != {MANIFEST_VERSION}"
            )
        self.image_size: int = int(manifest["image_size"])
        self.identities: dict[str, list[str]] = manifest["identities"]
        self.splits: dict[str, list[str]] = manifest["splits"]
        self.attributes: dict[str, dict] = manifest.get("attributes", {})

        train, val = set(self.splits["train"]), set(self.splits["val"])
        if train & val:
            raise ConfigError(f"train/val identities overlap: {sorted(train & val)}")
        for tag in self.splits["train"]:
            if len(self.identities[tag]) < 2:
                raise ConfigError(f"train identity {tag} has < 2 images")

        self._cache: dict[str, np.ndarray] = {}

    def identity_tags(self, split: str | None = None) -> list[str]:
        if split is None:
            return sorted(self.identities)
        if split not in self.splits:
            raise ConfigError(f"unknown split {split!r}")
        return list(self.splits[split])

    def paths_for(self, tag: str) -> list[str]:
        return list(self.identities[tag])

    def load_raw(self, rel_path: str) -> np.ndarray:
        arr = self._cache.get(rel_path)
        if arr is None:
            with Image.open(self.root / rel_path) as im:
                arr = np.asarray(im.convert("RGB"))
            self._cache[rel_path] = arr
        return arr

    def load(self, rel_path: str) -> torch.Tensor:
        return image_to_tensor(self.load_raw(rel_path))

    def load_identity(self, tag: str) -> torch.Tensor:
        return torch.stack([self.load(p) for p in self.identities[tag]])


def write_manifest(
    root: Path,
    image_size: int,
    identities: dict[str, list[str]],
    splits: dict[str, list[str]],
    attributes: dict[str, dict] | None = None,
) -> None:
    manifest = {
        "version": MANIFEST_VERSION,
        "image_size": image_size,
        "identities": identities,
        "splits": splits,
        "attributes": attributes or {},
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def ingest_folder_dataset(
    src: str | Path,
    out: str | Path,
    val_fraction: float = 0.2,
    seed: int = 0,
) -> Path:
    """Build a manifest for a folder-per-identity image corpus.

    Identities are assigned to val at random (identity-disjoint); images are
    referenced in place via relative paths when ``src == out``, otherwise
    copied.
    """
    import shutil

    src, out = Path(src), Path(out)
    tags = sorted(p.name for p in src.iterdir() if p.is_dir())
    if not tags:
        raise ConfigError(f"no identity subdirectories under {src}")

    identities: dict[str, list[str]] = {}
    out.mkdir(parents=True, exist_ok=True)
    image_size = None
    for tag in tags:
        rels = []
        for img_path in sorted((src / tag).iterdir()):
            if img_path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            rel = f"images/{tag}/{img_path.name}"
            dest = out / rel
            if dest.resolve() != img_path.resolve():
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.copy(img_path, dest)
            with Image.open(img_path) as im:
                w, h = im.size
            if w != h:
                raise ConfigError(f"{img_path} is not square ({w}x{h})")
            if image_size is None:
                image_size = w
            elif image_size != w:
                raise ConfigError(f"mixed image sizes: {image_size} vs {w}")
            rels.append(rel)
        if rels:
            identities[tag] = rels

    rng = np.random.default_rng(seed)
    tags = sorted(identities)
    n_val = max(1, int(round(len(tags) * val_fraction)))
    val = sorted(rng.choice(tags, size=n_val, replace=False).tolist())
    train = [t for t in tags if t not in set(val)]
    write_manifest(out, int(image_size), identities, {"train": train, "val": val})
    return out


def sample_pair(ds: IdentityDataset, step: int, rng: np.random.Generator) -> TrainingPair:
    """Draw one (x, y) pair; c alternates with step parity (even -> same)."""
    batch = sample_batch(ds, step, 1, rng)
    return batch


def sample_batch(
    ds: IdentityDataset, step: int, batch_size: int, rng: np.random.Generator
) -> TrainingPair:
    """Draw a whole batch sharing one pair label, alternating per step."""
    c = 1 if step % 2 == 0 else 0
    train_tags = ds.identity_tags("train")
    xs, ys, x_ids, y_ids = [], [], [], []
    for _ in range(batch_size):
        if c == 1:
            # resample until an identity with >= 2 images comes up; the
            # manifest invariant guarantees termination
            while True:
                tag = train_tags[rng.integers(len(train_tags))]
                paths = ds.paths_for(tag)
                if len(paths) >= 2:
                    break
            i, j = rng.choice(len(paths), size=2, replace=False)
            xs.append(ds.load(paths[i]))
            ys.append(ds.load(paths[j]))
            x_ids.append(tag)
            y_ids.append(tag)
        else:
            ti, tj = rng.choice(len(train_tags), size=2, replace=False)
            tag_x, tag_y = train_tags[ti], train_tags[tj]
            px = ds.paths_for(tag_x)
            py = ds.paths_for(tag_y)
            xs.append(ds.load(px[rng.integers(len(px))]))
            ys.append(ds.load(py[rng.integers(len(py))]))
            x_ids.append(tag_x)
            y_ids.append(tag_y)
    return TrainingPair(
        x=torch.stack(xs), y=torch.stack(ys), label=PairLabel(c), x_ids=x_ids, y_ids=y_ids
    )
