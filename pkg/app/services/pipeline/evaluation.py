"""
Scoring recognition results against ground truth.

Detection counts come from per-view greedy matching at IoU >= 0.5. The
plate text of a scene is the most confident result for it. Characters
are aligned by position when lengths agree and by edit distance
otherwise.
"""

from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.error_handlers import EvaluationError
from app.schemas.dataset import ManifestEntry
from app.schemas.evaluation import EvalReport
from app.services.geometry import Box, Detection, iou
from app.services.glyphs import CHARSET, NUM_CLASSES, encode_text
from app.services.pipeline.multiview import ViewStrategy
from app.services.pipeline.runner import Frame, PlateRecognizer, PlateResult
from app.services.synthgen import SceneRecord


class SceneTruth:
    __slots__ = ("text", "boxes")

    def __init__(self, text: str, boxes: Optional[Dict[int, Box]] = None):
        self.text = text
        self.boxes = boxes or {}


def truth_from_records(records: Iterable[SceneRecord]) -> Dict[int, SceneTruth]:
    truth: Dict[int, SceneTruth] = {}
    for record in records:
        entry = truth.setdefault(record.scene_id, SceneTruth(record.gt_text))
        if entry.text != record.gt_text:
            raise EvaluationError("Views of one scene disagree on the plate text", details={"scene_id": record.scene_id})
        entry.boxes[record.view_id] = record.gt_box
    return truth


def truth_from_manifest(entries: Iterable[ManifestEntry]) -> Dict[int, SceneTruth]:
    truth: Dict[int, SceneTruth] = {}
    for entry in entries:
        scene = truth.setdefault(entry.scene_id, SceneTruth(entry.gt_text))
        scene.boxes[entry.view_id] = Box.from_list(entry.gt_box)
    return truth


def precision_recall_f1(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def align_characters(truth: Sequence[int], predicted: Sequence[int]) -> List[Tuple[int, int]]:
    """
    Pairs (truth_class, predicted_class); 0 on the left is an insertion,
    0 on the right a deletion. Edit-distance backtrace prefers diagonal
    moves, then deletions.
    """
    if len(truth) == len(predicted):
        return list(zip(truth, predicted))

    n, m = len(truth), len(predicted)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if truth[i - 1] == predicted[j - 1] else 1
            dist[i, j] = min(dist[i - 1, j - 1] + cost, dist[i - 1, j] + 1, dist[i, j - 1] + 1)

    pairs: List[Tuple[int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (truth[i - 1] != predicted[j - 1]):
            pairs.append((truth[i - 1], predicted[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            pairs.append((truth[i - 1], 0))
            i -= 1
        else:
            pairs.append((0, predicted[j - 1]))
            j -= 1
    return pairs[::-1]


def _match_view(detections: Sequence[Detection], gt: Optional[Box], threshold: float) -> Tuple[int, int, int]:
    ordered = sorted(detections, key=lambda d: (-d.confidence, d.box.as_list()))
    matched = False
    tp = fp = 0
    for det in ordered:
        if gt is not None and not matched and iou(det.box, gt) >= threshold:
            matched = True
            tp += 1
        else:
            fp += 1
    fn = 1 if gt is not None and not matched else 0
    return tp, fp, fn


def evaluate(
    results: Sequence[PlateResult],
    truth: Mapping[int, SceneTruth],
    match_iou: float = settings.DETECTION_MATCH_IOU,
    strategy: Optional[str] = None,
) -> EvalReport:
    by_scene: Dict[int, List[PlateResult]] = defaultdict(list)
    for result in results:
        if result.scene_id is None or result.scene_id not in truth:
            raise EvaluationError("Result does not belong to a known scene", details={"scene_id": result.scene_id})
        by_scene[result.scene_id].append(result)

    tp = fp = fn = 0
    exact = 0
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for scene_id in sorted(truth):
        gt = truth[scene_id]
        scene_results = by_scene.get(scene_id, [])

        per_view: Dict[int, List[Detection]] = defaultdict(list)
        for result in scene_results:
            for det in result.detections:
                per_view[det.view_id].append(det)
        for view_id in sorted(set(per_view) | set(gt.boxes)):
            t, f, n = _match_view(per_view.get(view_id, []), gt.boxes.get(view_id), match_iou)
            tp, fp, fn = tp + t, fp + f, fn + n

        best = min(scene_results, key=lambda r: (-r.confidence, r.text), default=None)
        predicted = best.text if best is not None else ""
        exact += int(predicted == gt.text)
        for t_class, p_class in align_characters(encode_text(gt.text), encode_text(predicted)):
            confusion[t_class, p_class] += 1

    precision, recall, f1 = precision_recall_f1(tp, fp, fn)
    num_chars = int(confusion[1:].sum())
    correct = int(np.trace(confusion[1:, 1:]))
    deletions = int(confusion[1:, 0].sum())
    insertions = int(confusion[0, 1:].sum())
    return EvalReport(
        strategy=strategy,
        num_scenes=len(truth),
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        plate_exact_match_rate=exact / len(truth) if truth else 0.0,
        character_accuracy=correct / num_chars if num_chars else 0.0,
        num_characters=num_chars,
        substitutions=num_chars - correct - deletions,
        insertions=insertions,
        deletions=deletions,
        charset=CHARSET,
        confusion=confusion.tolist(),
    )


def scene_frames(records: Iterable[SceneRecord]) -> Dict[int, List[Frame]]:
    frames: Dict[int, List[Frame]] = defaultdict(list)
    for record in records:
        frames[record.scene_id].append(Frame(record.view_id, record.timestamp, record.frame))
    return {scene_id: sorted(views, key=lambda f: f.view_id) for scene_id, views in frames.items()}


def run_scenes(
    recognizer: PlateRecognizer,
    records: Sequence[SceneRecord],
    strategy: Optional[ViewStrategy] = None,
) -> List[PlateResult]:
    results: List[PlateResult] = []
    for scene_id, frames in sorted(scene_frames(records).items()):
        results.extend(recognizer.process_frames(frames, scene_id=scene_id, strategy=strategy))
    return results


def evaluate_records(
    recognizer: PlateRecognizer,
    records: Sequence[SceneRecord],
    strategy: Optional[ViewStrategy] = None,
) -> EvalReport:
    strategy = ViewStrategy(strategy or recognizer.strategy)
    results = run_scenes(recognizer, records, strategy)
    return evaluate(results, truth_from_records(records), recognizer.config.DETECTION_MATCH_IOU, strategy.value)


def compare_strategies(
    recognizer: PlateRecognizer,
    records: Sequence[SceneRecord],
    strategies: Sequence[ViewStrategy] = tuple(ViewStrategy),
) -> Dict[str, EvalReport]:
    """One report per view strategy on the same scenes."""
    return {ViewStrategy(s).value: evaluate_records(recognizer, records, s) for s in strategies}
