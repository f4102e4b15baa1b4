"""
Deterministic synthetic plates, degradations and multi-view scenes.

Everything here is a pure function of its arguments and an integer seed,
so a dataset is bitwise reproducible from (config, seed). Record seeds are
derived as `seed ^ record_index`.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from app.core.error_handlers import (
    DatasetError,
    InputTooSmallError,
    InvalidParameterError,
    ValidationError,
)
from app.core.logger import get_logger
from app.schemas.dataset import ManifestEntry
from app.schemas.training import DegradationRanges, SynthConfig
from app.services.geometry import Box
from app.services.glyphs import DIGITS, EXTRAS, GLYPH_HEIGHT, GLYPH_WIDTH, LATIN, glyph_bitmap
from app.services.imaging import Image, load_png, save_png

logger = get_logger(__name__)

MAX_TEXT_LENGTH = 10
MANIFEST_NAME = "manifest.jsonl"
_PLATE_MARGIN = 2
_FRAME_MARGIN = 8
_SERIES_SYMBOLS = LATIN + EXTRAS.replace("-", "").replace(".", "")


class Layout(str, Enum):
    SINGLE_ROW = "single-row"
    TWO_ROW = "two-row"


@dataclass(frozen=True)
class PlateSpec:
    text: str
    layout: Layout = Layout.SINGLE_ROW
    plate_size: Tuple[int, int] = (150, 36)
    split_index: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValidationError("Plate text must be non-empty")
        if len(self.text) > MAX_TEXT_LENGTH:
            raise ValidationError(
                f"Plate text longer than {MAX_TEXT_LENGTH} characters",
                details={"text": self.text},
            )
        object.__setattr__(self, "layout", Layout(self.layout))
        if self.layout is Layout.TWO_ROW:
            split = self.split_index if self.split_index is not None else default_split_index(self.text)
            if not 0 < split < len(self.text):
                raise ValidationError("Two-row split index out of range", details={"split_index": split})
            object.__setattr__(self, "split_index", split)
        else:
            object.__setattr__(self, "split_index", None)

    @property
    def rows(self) -> List[str]:
        if self.layout is Layout.TWO_ROW:
            return [self.text[: self.split_index], self.text[self.split_index:]]
        return [self.text]


@dataclass(frozen=True)
class DegradationProfile:
    blur_sigma: float = 0.0
    noise_std: float = 0.0
    occlusion_fraction: float = 0.0
    perspective_skew: float = 0.0
    brightness_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.blur_sigma < 0.0 or self.noise_std < 0.0:
            raise InvalidParameterError("blur_sigma and noise_std must be non-negative")
        if not 0.0 <= self.occlusion_fraction < 1.0:
            raise InvalidParameterError("occlusion_fraction must lie in [0, 1)")
        if not 0.0 <= self.perspective_skew <= 0.5:
            raise InvalidParameterError("perspective_skew must lie in [0, 0.5]")
        if not self.brightness_scale > 0.0:
            raise InvalidParameterError("brightness_scale must be positive")

    @property
    def is_identity(self) -> bool:
        return self == DegradationProfile()


class RenderedPlate(NamedTuple):
    image: Image
    char_boxes: List[Box]


@dataclass
class SceneRecord:
    frame: Image
    gt_box: Box
    gt_text: str
    view_id: int
    timestamp: float
    degradation: DegradationProfile
    seed: int
    scene_id: int = 0
    spec: Optional[PlateSpec] = None
    image_path: str = ""

    def to_manifest_entry(self) -> ManifestEntry:
        spec = self.spec or PlateSpec(self.gt_text)
        return ManifestEntry(
            image_path=self.image_path,
            scene_id=self.scene_id,
            view_id=self.view_id,
            timestamp=self.timestamp,
            gt_box=self.gt_box.as_list(),
            gt_text=self.gt_text,
            layout=spec.layout.value,
            split_index=spec.split_index,
            plate_size=spec.plate_size,
            seed=self.seed,
            blur_sigma=self.degradation.blur_sigma,
            noise_std=self.degradation.noise_std,
            occlusion_fraction=self.degradation.occlusion_fraction,
            perspective_skew=self.degradation.perspective_skew,
            brightness_scale=self.degradation.brightness_scale,
        )


@dataclass
class Dataset:
    records: List[SceneRecord] = field(default_factory=list)
    manifest_path: Optional[Path] = None

    @property
    def texts(self) -> List[str]:
        return [r.gt_text for r in self.records]


def default_split_index(text: str) -> int:
    """Row break after the series letter, its separator and one digit (e.g. 29A1 / 2345)."""
    for i, ch in enumerate(text):
        if ch in _SERIES_SYMBOLS:
            split = i + 1
            if split < len(text) and text[split] == "-":
                split += 1
            return min(split + 1, len(text) - 1)
    return max(1, len(text) - 4)


def render_plate(spec: PlateSpec, seed: int) -> RenderedPlate:
    """Dark glyphs on a light plate with a thin border; returns per-character boxes."""
    bitmaps = [[glyph_bitmap(ch) for ch in row] for row in spec.rows]

    rng = np.random.default_rng(seed)
    background = rng.uniform(0.82, 0.95)
    ink = rng.uniform(0.05, 0.2)

    width, height = spec.plate_size
    img = np.full((height, width), background)
    img[0, :] = img[-1, :] = ink
    img[:, 0] = img[:, -1] = ink

    rows = spec.rows
    row_height = (height - 2 * _PLATE_MARGIN - (len(rows) - 1) * _PLATE_MARGIN) // len(rows)
    longest = max(len(r) for r in rows)
    scale = min(row_height // GLYPH_HEIGHT, (width - 2 * _PLATE_MARGIN) // (6 * longest - 1))
    if scale < 1:
        raise InputTooSmallError(
            "Plate too small for its text",
            details={"plate_size": list(spec.plate_size), "text": spec.text},
        )

    glyph_w, glyph_h = GLYPH_WIDTH * scale, GLYPH_HEIGHT * scale
    boxes: List[Box] = []
    for r, row_bitmaps in enumerate(bitmaps):
        row_width = len(row_bitmaps) * 6 * scale - scale
        x = (width - row_width) // 2
        y = _PLATE_MARGIN + r * (row_height + _PLATE_MARGIN) + (row_height - glyph_h) // 2
        for bitmap in row_bitmaps:
            cell = np.kron(bitmap, np.ones((scale, scale)))
            region = img[y:y + glyph_h, x:x + glyph_w]
            img[y:y + glyph_h, x:x + glyph_w] = np.where(cell > 0, ink, region)
            boxes.append(Box(x, y, x + glyph_w, y + glyph_h))
            x += glyph_w + scale

    return RenderedPlate(img, boxes)


def _keystone(img: Image, skew: float) -> Image:
    h, w = img.shape
    rows = np.arange(h, dtype=np.float64)
    row_scale = 1.0 - skew * (1.0 - rows / max(h - 1, 1))
    cx = (w - 1) / 2.0
    cols = np.arange(w, dtype=np.float64)
    src_c = cx + (cols[None, :] - cx) / row_scale[:, None]
    src_r = np.broadcast_to(rows[:, None], src_c.shape)
    return ndimage.map_coordinates(img, [src_r, src_c], order=1, mode="constant", cval=float(np.median(img)))


def degrade(img: Image, profile: DegradationProfile, seed: int) -> Image:
    """Keystone warp, blur, brightness, noise, then an occluding band; clamped to [0, 1]."""
    out = np.array(img, dtype=np.float64, copy=True)
    if profile.is_identity:
        return out

    noise_ss, occlusion_ss = np.random.SeedSequence(seed).spawn(2)

    if profile.perspective_skew > 0.0:
        out = _keystone(out, profile.perspective_skew)
    if profile.blur_sigma > 0.0:
        out = ndimage.gaussian_filter(out, profile.blur_sigma, mode="nearest")
    if profile.brightness_scale != 1.0:
        out = out * profile.brightness_scale
    if profile.noise_std > 0.0:
        out = out + np.random.default_rng(noise_ss).normal(0.0, profile.noise_std, out.shape)
    if profile.occlusion_fraction > 0.0:
        rng = np.random.default_rng(occlusion_ss)
        w = out.shape[1]
        band = int(round(profile.occlusion_fraction * w))
        if band > 0:
            x0 = int(rng.integers(0, w - band + 1))
            out[:, x0:x0 + band] = rng.uniform(0.25, 0.6)

    return np.clip(out, 0.0, 1.0)


def _background(rng: np.random.Generator, height: int, width: int, plate_box: Box) -> Image:
    base = rng.uniform(0.3, 0.6)
    ramp = np.linspace(-0.08, 0.08, height)[:, None] * rng.choice([-1.0, 1.0])
    texture = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (height, width)), sigma=6.0)
    frame = base + ramp + texture

    # Soft vehicle body around the plate
    body = np.zeros((height, width))
    bx0 = max(0, int(plate_box.x_min) - int(rng.integers(20, 40)))
    bx1 = min(width, int(plate_box.x_max) + int(rng.integers(20, 40)))
    by0 = max(0, int(plate_box.y_min) - int(rng.integers(15, 35)))
    by1 = min(height, int(plate_box.y_max) + int(rng.integers(10, 25)))
    body[by0:by1, bx0:bx1] = rng.uniform(-0.15, 0.15)
    frame = frame + ndimage.gaussian_filter(body, sigma=4.0)
    return np.clip(frame, 0.0, 1.0)


def render_scene(
    spec: PlateSpec,
    profile: DegradationProfile,
    seed: int,
    frame_size: Tuple[int, int] = (240, 160),
) -> Tuple[Image, Box]:
    """Render one camera view: degraded plate pasted onto a smooth background."""
    frame_w, frame_h = frame_size
    plate_w, plate_h = spec.plate_size
    if plate_w + 2 * _FRAME_MARGIN > frame_w or plate_h + 2 * _FRAME_MARGIN > frame_h:
        raise InputTooSmallError(
            "Frame too small for the plate",
            details={"frame_size": list(frame_size), "plate_size": list(spec.plate_size)},
        )

    plate = degrade(render_plate(spec, seed).image, profile, seed)

    scene_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    x0 = int(scene_rng.integers(_FRAME_MARGIN, frame_w - plate_w - _FRAME_MARGIN + 1))
    y0 = int(scene_rng.integers(_FRAME_MARGIN, frame_h - plate_h - _FRAME_MARGIN + 1))
    gt_box = Box(x0, y0, x0 + plate_w, y0 + plate_h)

    frame = _background(scene_rng, frame_h, frame_w, gt_box)
    frame[y0:y0 + plate_h, x0:x0 + plate_w] = plate
    return frame, gt_box


def random_plate_text(rng: np.random.Generator) -> str:
    """Vietnamese-style plate text: province digits, series letter, serial digits."""
    province = "".join(rng.choice(list(DIGITS), size=2))
    series = str(rng.choice(list(_SERIES_SYMBOLS)))
    dash = "-" if rng.random() < 0.25 else ""
    serial = "".join(rng.choice(list(DIGITS), size=int(rng.integers(4, 6))))
    if len(serial) == 5 and rng.random() < 0.3:
        serial = serial[:3] + "." + serial[3:]
    return province + series + dash + serial


def sample_profile(rng: np.random.Generator, ranges: DegradationRanges, mild: bool = False) -> DegradationProfile:
    factor = 0.25 if mild else 1.0
    low, high = ranges.brightness_range
    occlusion = 0.0 if mild else rng.uniform(0.0, ranges.max_occlusion_fraction)
    return DegradationProfile(
        blur_sigma=float(rng.uniform(0.0, ranges.max_blur_sigma * factor)),
        noise_std=float(rng.uniform(0.0, ranges.max_noise_std * factor)),
        occlusion_fraction=float(occlusion),
        perspective_skew=float(rng.uniform(0.0, ranges.max_perspective_skew * factor)),
        brightness_scale=float(rng.uniform(low, high)),
    )


def make_dataset(config: SynthConfig, seed: int, out_dir: Optional[Path] = None) -> Dataset:
    """
    Render `num_scenes` scenes with `views_per_scene` views each.

    Views of a scene share the plate text and layout but get independent
    degradations and placements. When `out_dir` is given, PNG frames and a
    JSON-lines manifest are written there.
    """
    rng = np.random.default_rng(seed)
    records: List[SceneRecord] = []

    for scene_id in range(config.num_scenes):
        text = random_plate_text(rng)
        two_row = rng.random() < config.two_row_fraction
        spec = PlateSpec(
            text=text,
            layout=Layout.TWO_ROW if two_row else Layout.SINGLE_ROW,
            plate_size=config.two_row_size if two_row else config.single_row_size,
        )
        for view_id in range(config.views_per_scene):
            record_seed = seed ^ len(records)
            profile = sample_profile(
                rng, config.degradation, mild=config.clean_first_view and view_id == 0
            )
            frame, gt_box = render_scene(spec, profile, record_seed, (config.frame_width, config.frame_height))
            records.append(
                SceneRecord(
                    frame=frame,
                    gt_box=gt_box,
                    gt_text=text,
                    view_id=view_id,
                    timestamp=scene_id * config.scene_interval + view_id * config.view_offset,
                    degradation=profile,
                    seed=record_seed,
                    scene_id=scene_id,
                    spec=spec,
                    image_path=f"images/scene{scene_id:05d}_view{view_id:02d}.png",
                )
            )

    dataset = Dataset(records)
    if out_dir is not None:
        dataset.manifest_path = write_dataset(dataset, Path(out_dir))
    logger.info(f"Rendered {len(records)} records for {config.num_scenes} scenes (seed={seed})")
    return dataset


def write_dataset(dataset: Dataset, out_dir: Path) -> Path:
    manifest_path = out_dir / MANIFEST_NAME
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = []
        for record in dataset.records:
            save_png(record.frame, out_dir / record.image_path)
            lines.append(record.to_manifest_entry().model_dump_json())
        manifest_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"Cannot write dataset to {out_dir}", details={"reason": str(e)})
    return manifest_path


def read_manifest(manifest_path: Path) -> List[ManifestEntry]:
    try:
        text = Path(manifest_path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"Cannot read manifest {manifest_path}", details={"reason": str(e)})
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entries.append(ManifestEntry.model_validate(json.loads(line)))
        except ValueError as e:
            raise DatasetError(
                f"Malformed manifest line {line_no}",
                details={"path": str(manifest_path), "reason": str(e)},
            )
    return entries


def load_records(manifest_path: Path, entries: Optional[Sequence[ManifestEntry]] = None) -> List[SceneRecord]:
    """Rebuild SceneRecords (with frames loaded from disk) from a manifest."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    records = []
    for entry in entries if entries is not None else read_manifest(manifest_path):
        spec = PlateSpec(entry.gt_text, Layout(entry.layout), tuple(entry.plate_size), entry.split_index)
        records.append(
            SceneRecord(
                frame=load_png(root / entry.image_path),
                gt_box=Box.from_list(entry.gt_box),
                gt_text=entry.gt_text,
                view_id=entry.view_id,
                timestamp=entry.timestamp,
                degradation=DegradationProfile(
                    entry.blur_sigma,
                    entry.noise_std,
                    entry.occlusion_fraction,
                    entry.perspective_skew,
                    entry.brightness_scale,
                ),
                seed=entry.seed,
                scene_id=entry.scene_id,
                spec=spec,
                image_path=entry.image_path,
            )
        )
    return records
