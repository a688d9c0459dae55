"""Procedural identity-sprite dataset plus its ground-truth adapters.

Each "identi-face" is a smooth 64-px face sprite. Who the sprite is
(identity) is a geometry vector: face shape, eye spacing/size/shade, nose
length, mouth width, brow tilt, skin tone. What varies per image (content)
is pose (translation, rotation, scale), background color, and expression
(mouth curvature). That split gives desk-scale ground truth for
disentanglement: a correct model must keep pose/background fixed while it
rewrites the geometry.

The sprite detector and attribute extractor defined here are the toy
stand-ins for external face detectors and attribute classifiers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from faceveil.data import tensor_to_image, write_manifest
from faceveil.errors import ConfigError

BACKGROUND_PALETTE = np.array(
    [
        [0.72, 0.84, 0.95],  # light blue
        [0.76, 0.92, 0.77],  # light green
        [0.86, 0.80, 0.94],  # lavender
        [0.94, 0.89, 0.77],  # beige
        [0.84, 0.84, 0.86],  # gray
    ]
)

POSE_SHIFT_MAX = 0.18  # translation range in [-1, 1] image coordinates
POSE_CELL_EDGE = POSE_SHIFT_MAX / 3.0  # 3x3 grid over the shift square

IDENTITY_PARAM_RANGES = {
    "face_aspect": (0.85, 1.25),
    "face_size": (0.46, 0.60),
    "skin": (0.0, 1.0),
    "eye_dx": (0.32, 0.55),
    "eye_size": (0.07, 0.13),
    "nose_len": (0.18, 0.45),
    "mouth_w": (0.38, 0.75),
    "brow_tilt": (-0.45, 0.45),
    "eye_shade": (0.0, 1.0),
}

_SKIN_LIGHT = np.array([0.98, 0.85, 0.70])
_SKIN_DARK = np.array([0.55, 0.38, 0.26])
_EYE_BROWN = np.array([0.28, 0.17, 0.10])
_EYE_BLUE = np.array([0.14, 0.22, 0.38])
_SCLERA = np.array([0.97, 0.97, 0.99])
_MOUTH = np.array([0.62, 0.18, 0.20])
_BROW = np.array([0.20, 0.14, 0.10])


@dataclass(frozen=True)
class SpriteIdentity:
    face_aspect: float
    face_size: float
    skin: float
    eye_dx: float
    eye_size: float
    nose_len: float
    mouth_w: float
    brow_tilt: float
    eye_shade: float

    def as_vector(self) -> np.ndarray:
        vals = [getattr(self, k) for k in IDENTITY_PARAM_RANGES]
        return np.array(vals)


@dataclass(frozen=True)
class SpriteContent:
    cx: float
    cy: float
    rot: float
    scale: float
    background: int
    mouth_curve: float

    @property
    def pose_cell(self) -> int:
        return pose_cell_of(self.cx, self.cy)


def pose_cell_of(cx: float, cy: float) -> int:
    col = 0 if cx < -POSE_CELL_EDGE else (2 if cx > POSE_CELL_EDGE else 1)
    row = 0 if cy < -POSE_CELL_EDGE else (2 if cy > POSE_CELL_EDGE else 1)
    return row * 3 + col


def _soft_inside(dist: np.ndarray, soft: float) -> np.ndarray:
    """1 inside (dist<=0), 0 outside, smooth ramp of width ``soft``."""
    return np.clip(0.5 - dist / soft, 0.0, 1.0)


def _segment_distance(u, v, p0, p1):
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    den = dx * dx + dy * dy
    if den < 1e-12:
        return np.hypot(u - p0[0], v - p0[1])
    t = np.clip(((u - p0[0]) * dx + (v - p0[1]) * dy) / den, 0.0, 1.0)
    return np.hypot(u - (p0[0] + t * dx), v - (p0[1] + t * dy))


def _polyline_distance(u, v, points):
    d = None
    for p0, p1 in zip(points[:-1], points[1:]):
        seg = _segment_distance(u, v, p0, p1)
        d = seg if d is None else np.minimum(d, seg)
    return d


def render_sprite(identity: SpriteIdentity, content: SpriteContent, size: int = 64) -> np.ndarray:
    """Render one sprite to a uint8 HWC image."""
    lin = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    x, y = np.meshgrid(lin, lin)

    # image coords -> face-local coords (undo translation/rotation/scale)
    ct, st = np.cos(content.rot), np.sin(content.rot)
    u = ((x - content.cx) * ct + (y - content.cy) * st) / content.scale
    v = (-(x - content.cx) * st + (y - content.cy) * ct) / content.scale

    soft = 2.5 / size
    img = np.ones((size, size, 3)) * BACKGROUND_PALETTE[content.background]

    def paint(alpha, color):
        nonlocal img
        img = img * (1.0 - alpha[..., None]) + alpha[..., None] * np.asarray(color)

    rx = identity.face_size
    ry = identity.face_size * identity.face_aspect

    face_dist = np.sqrt((u / rx) ** 2 + (v / ry) ** 2) - 1.0
    skin = _SKIN_LIGHT + identity.skin * (_SKIN_DARK - _SKIN_LIGHT)
    paint(_soft_inside(face_dist * min(rx, ry), soft), skin)

    eye_y = -0.30 * ry
    eye_r = identity.eye_size
    for sx in (-1.0, 1.0):
        ex = sx * identity.eye_dx * rx
        sclera = np.sqrt(((u - ex) / eye_r) ** 2 + ((v - eye_y) / (0.65 * eye_r)) ** 2) - 1.0
        paint(_soft_inside(sclera * 0.65 * eye_r, soft), _SCLERA)
        pupil = np.hypot(u - ex, v - eye_y) - 0.45 * eye_r
        shade = _EYE_BROWN + identity.eye_shade * (_EYE_BLUE - _EYE_BROWN)
        paint(_soft_inside(pupil, soft), shade)

        brow_y = eye_y - 2.1 * eye_r
        tilt = identity.brow_tilt * sx
        half = 1.25 * eye_r
        p0 = (ex - half, brow_y + tilt * half)
        p1 = (ex + half, brow_y - tilt * half)
        brow = _segment_distance(u, v, p0, p1) - 0.018
        paint(_soft_inside(brow, soft), _BROW)

    nose = _segment_distance(u, v, (0.0, -0.05 * ry), (0.0, (-0.05 + identity.nose_len) * ry)) - 0.012
    paint(_soft_inside(nose, soft), skin * 0.62)

    mouth_y = 0.52 * ry
    half_w = 0.5 * identity.mouth_w * rx
    s = np.linspace(-1.0, 1.0, 15)
    pts = [(si * half_w, mouth_y + content.mouth_curve * 0.10 * ry * (si * si - 0.5)) for si in s]
    mouth = _polyline_distance(u, v, pts) - 0.016
    paint(_soft_inside(mouth, soft), _MOUTH)

    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def sample_identities(n: int, rng: np.random.Generator, min_dist: float = 0.85) -> list[SpriteIdentity]:
    """Draw identity parameter vectors with a minimum pairwise separation in
    normalized parameter space, so toy identities stay tellable-apart."""
    keys = list(IDENTITY_PARAM_RANGES)
    los = np.array([IDENTITY_PARAM_RANGES[k][0] for k in keys])
    his = np.array([IDENTITY_PARAM_RANGES[k][1] for k in keys])
    chosen: list[np.ndarray] = []
    tries = 0
    while len(chosen) < n:
        tries += 1
        if tries > 20000:
            raise ConfigError(f"could not place {n} identities at min_dist={min_dist}")
        cand = rng.uniform(0.0, 1.0, size=len(keys))
        if all(np.linalg.norm(cand - c) >= min_dist for c in chosen):
            chosen.append(cand)
    out = []
    for c in chosen:
        vals = los + c * (his - los)
        out.append(SpriteIdentity(**{k: float(v) for k, v in zip(keys, vals)}))
    return out


def sample_content(rng: np.random.Generator) -> SpriteContent:
    return SpriteContent(
        cx=float(rng.uniform(-POSE_SHIFT_MAX, POSE_SHIFT_MAX)),
        cy=float(rng.uniform(-POSE_SHIFT_MAX, POSE_SHIFT_MAX)),
        rot=float(rng.uniform(-0.18, 0.18)),
        scale=float(rng.uniform(0.88, 1.12)),
        background=int(rng.integers(len(BACKGROUND_PALETTE))),
        mouth_curve=float(rng.uniform(-1.0, 1.0)),
    )


def make_toy_dataset(
    out_dir: str | Path,
    identities: int = 25,
    per_identity: int = 50,
    val_identities: int = 5,
    image_size: int = 64,
    seed: int = 0,
) -> Path:
    """Generate a sprite dataset with a manifest; returns the dataset root."""
    if identities < 2 or per_identity < 2:
        raise ConfigError("need at least 2 identities with 2 images each")
    if not (0 < val_identities < identities):
        raise ConfigError("val_identities must be in (0, identities)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    identity_params = sample_identities(identities, rng)
    tags = [f"id_{i:03d}" for i in range(identities)]
    manifest_ids: dict[str, list[str]] = {}
    attributes: dict[str, dict] = {}
    from PIL import Image

    for tag, ident in zip(tags, identity_params):
        rels = []
        for j in range(per_identity):
            content = sample_content(rng)
            img = render_sprite(ident, content, size=image_size)
            rel = f"images/{tag}/img_{j:03d}.png"
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(img).save(dest, format="PNG")
            rels.append(rel)
            attributes[rel] = {
                "background": content.background,
                "pose_cell": content.pose_cell,
            }
        manifest_ids[tag] = rels

    # last val_identities tags become the held-out split
    splits = {"train": tags[:-val_identities], "val": tags[-val_identities:]}
    write_manifest(out, image_size, manifest_ids, splits, attributes)
    return out


# --- toy adapters -----------------------------------------------------------


def _to_unit_array(image: torch.Tensor | np.ndarray) -> np.ndarray:
    """Accept CHW [-1,1] tensors or HWC uint8 arrays; return HWC float [0,1]."""
    if isinstance(image, torch.Tensor):
        return tensor_to_image(image).astype(np.float64) / 255.0
    arr = np.asarray(image)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def estimate_background(image: torch.Tensor | np.ndarray) -> int:
    """Nearest palette color to the mean of the four 4x4 corner patches."""
    arr = _to_unit_array(image)
    k = 4
    corners = np.stack(
        [arr[:k, :k], arr[:k, -k:], arr[-k:, :k], arr[-k:, -k:]]
    ).reshape(-1, 3)
    mean = corners.mean(axis=0)
    return int(np.argmin(np.linalg.norm(BACKGROUND_PALETTE - mean, axis=1)))


def foreground_mask(image: torch.Tensor | np.ndarray) -> np.ndarray:
    arr = _to_unit_array(image)
    bg = BACKGROUND_PALETTE[estimate_background(image)]
    return np.linalg.norm(arr - bg, axis=-1) > 0.16


def estimate_pose_cell(image: torch.Tensor | np.ndarray) -> int:
    """Quantized centroid of the non-background mask, on the 3x3 pose grid."""
    mask = foreground_mask(image)
    size = mask.shape[0]
    if not mask.any():
        return 4  # center cell for empty images; detector flags these anyway
    lin = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    ys, xs = np.nonzero(mask)
    return pose_cell_of(float(lin[xs].mean()), float(lin[ys].mean()))


class SpriteAttributeAdapter:
    """Predicts the identity-unrelated toy attributes from pixels alone."""

    names = ("background", "pose_cell")

    def predict(self, image: torch.Tensor | np.ndarray) -> dict[str, int]:
        return {
            "background": estimate_background(image),
            "pose_cell": estimate_pose_cell(image),
        }


class SpriteDetector:
    """Counts a detection when a plausibly face-sized foreground blob exists."""

    name = "sprite"

    def detect(self, image: torch.Tensor | np.ndarray) -> list[tuple[int, int, int, int]]:
        mask = foreground_mask(image)
        frac = float(mask.mean())
        if not (0.04 <= frac <= 0.95):
            return []
        ys, xs = np.nonzero(mask)
        return [(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))]
