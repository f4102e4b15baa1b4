"""Combining aligned crops of one plate seen by several cameras."""

from collections import defaultdict
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.error_handlers import InvalidParameterError
from app.services.fusion import apply_fuser, fuse_analytic, fusion_weights, information
from app.services.imaging import Image, crop
from app.services.neuralcore.tensor import Params
from app.services.pipeline.alignment import rectify_and_align
from app.services.synthgen import Layout, SceneRecord


class ViewStrategy(str, Enum):
    FUSE = "fuse"
    BEST_VIEW = "best_view"
    FIRST_VIEW = "first_view"


def _fuse_two(a: Image, b: Image, c: float, fuser: Optional[Params]) -> Image:
    """Fuse the common extent; the higher-information view fills the margins."""
    ga, gb = information(a), information(b)
    primary, secondary = (a, b) if ga >= gb else (b, a)
    h = min(a.shape[0], b.shape[0])
    w = min(a.shape[1], b.shape[1])

    out = primary.copy()
    if fuser is not None:
        out[:h, :w] = apply_fuser(fuser, a[:h, :w], b[:h, :w])
    else:
        out[:h, :w] = fuse_analytic(a[:h, :w], b[:h, :w], fusion_weights(ga, gb, c))
    return out


def rank_views(crops: Sequence[Image]) -> List[Tuple[int, float]]:
    """(index, g) sorted by descending information; index breaks ties."""
    scores = [(i, information(image)) for i, image in enumerate(crops)]
    return sorted(scores, key=lambda item: (-item[1], item[0]))


def fuse_views(
    crops: Sequence[Image],
    c: float = settings.FUSION_TEMPERATURE,
    strategy: ViewStrategy = ViewStrategy.FUSE,
    fuser: Optional[Params] = None,
) -> Image:
    """
    One image from the aligned crops of a plate.

    With more than two crops the two highest-information views are fused
    first and the rest are folded in by descending information.
    """
    if not crops:
        raise InvalidParameterError("fuse_views needs at least one crop")
    strategy = ViewStrategy(strategy)
    if len(crops) == 1 or strategy is ViewStrategy.FIRST_VIEW:
        return np.array(crops[0], copy=True)

    ranked = rank_views(crops)
    if strategy is ViewStrategy.BEST_VIEW:
        return np.array(crops[ranked[0][0]], copy=True)

    fused = _fuse_two(crops[ranked[0][0]], crops[ranked[1][0]], c, fuser)
    for index, _ in ranked[2:]:
        fused = _fuse_two(fused, crops[index], c, fuser)
    return fused


def view_pairs(records: Sequence[SceneRecord]) -> List[Tuple[Image, Image]]:
    """Canonical ground-truth crops of the first two views of every scene."""
    by_scene: Dict[int, Dict[int, SceneRecord]] = defaultdict(dict)
    for record in records:
        by_scene[record.scene_id][record.view_id] = record
    pairs = []
    for scene_id in sorted(by_scene):
        views = [by_scene[scene_id][v] for v in sorted(by_scene[scene_id])[:2]]
        if len(views) < 2:
            continue
        crops = [crop(r.frame, *r.gt_box.as_list()) for r in views]
        first, second = rectify_and_align(crops, layout=Layout.SINGLE_ROW)
        pairs.append((first.image, second.image))
    return pairs
