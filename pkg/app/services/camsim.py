"""
Simulated multi-camera ingestion.

Cameras are statically routed to workers by id. Each worker thread owns a
bounded queue; a full queue drops its oldest frame. The HTTP service and
the offline simulator share the same pool.
"""

import threading
import time
from collections import deque
from concurrent.futures import Future, wait
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.error_handlers import FrameDroppedError, InvalidParameterError
from app.core.logger import get_logger
from app.schemas.recognition import SimulationReport, WorkerStats
from app.schemas.training import SimulationConfig
from app.services.imaging import Image

logger = get_logger(__name__)

ProcessFn = Callable[[Image], Any]


def route(camera_id: int, num_workers: int) -> int:
    if num_workers < 1:
        raise InvalidParameterError("num_workers must be at least 1", details={"num_workers": num_workers})
    return camera_id % num_workers


@dataclass(frozen=True)
class CameraStream:
    camera_id: int
    frames: Tuple[int, ...]
    frame_interval: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not self.frame_interval > 0.0:
            raise InvalidParameterError("frame_interval must be positive", details={"camera_id": self.camera_id})
        if not self.frames:
            raise InvalidParameterError("A camera stream needs at least one frame", details={"camera_id": self.camera_id})

    def schedule(self, duration: float) -> List[Tuple[float, int]]:
        """(timestamp, frame index) pairs in timestamp order; the frame slice loops."""
        events = []
        k = 0
        while self.phase + k * self.frame_interval < duration:
            events.append((self.phase + k * self.frame_interval, self.frames[k % len(self.frames)]))
            k += 1
        return events


@dataclass
class _Job:
    camera_id: int
    seq: int
    frame: Image
    future: Future
    enqueued_at: float


@dataclass
class _Counters:
    accepted: int = 0
    processed: int = 0
    errors: int = 0
    dropped: int = 0
    in_flight: int = 0
    latencies: List[float] = field(default_factory=list)


class FrameWorker(threading.Thread):
    def __init__(self, worker_id: int, capacity: int, process_fn: ProcessFn):
        super().__init__(name=f"lpr-worker-{worker_id}", daemon=True)
        self.worker_id = worker_id
        self.capacity = capacity
        self.process_fn = process_fn
        self.cameras: set = set()
        self._queue: Deque[_Job] = deque()
        self._cond = threading.Condition()
        self._stopping = False
        self._counters = _Counters()
        # camera id -> sequence numbers in processing order
        self.order: Dict[int, List[int]] = {}

    def submit(self, job: _Job) -> None:
        dropped: Optional[_Job] = None
        with self._cond:
            self._counters.accepted += 1
            self.cameras.add(job.camera_id)
            if len(self._queue) >= self.capacity:
                dropped = self._queue.popleft()
                self._counters.dropped += 1
            self._queue.append(job)
            self._cond.notify()
        if dropped is not None:
            logger.debug(f"worker {self.worker_id} dropped frame {dropped.seq} of camera {dropped.camera_id}")
            dropped.future.set_exception(
                FrameDroppedError(details={"worker_id": self.worker_id, "camera_id": dropped.camera_id})
            )

    def stop(self) -> None:
        with self._cond:
            self._stopping = True
            self._cond.notify_all()

    def run(self) -> None:
        while True:
            with self._cond:
                while not self._queue and not self._stopping:
                    self._cond.wait()
                if not self._queue:
                    return
                job = self._queue.popleft()
                self._counters.in_flight += 1
                self.order.setdefault(job.camera_id, []).append(job.seq)

            try:
                result = self.process_fn(job.frame)
                error = None
            except Exception as e:
                logger.error(f"worker {self.worker_id} failed on camera {job.camera_id}: {e}")
                result, error = None, e
            latency = time.perf_counter() - job.enqueued_at

            with self._cond:
                self._counters.in_flight -= 1
                self._counters.processed += 1
                self._counters.errors += error is not None
                self._counters.latencies.append(latency)

            if error is not None:
                job.future.set_exception(error)
            else:
                job.future.set_result(result)

    def stats(self) -> WorkerStats:
        with self._cond:
            c = self._counters
            latencies = list(c.latencies)
            snapshot = WorkerStats(
                worker_id=self.worker_id,
                cameras=sorted(self.cameras),
                accepted=c.accepted,
                frames_processed=c.processed,
                errors=c.errors,
                dropped=c.dropped,
                in_flight=c.in_flight,
                queue_depth=len(self._queue),
                queue_capacity=self.capacity,
            )
        if latencies:
            p50, p90, p99 = np.quantile(latencies, [0.5, 0.9, 0.99])
            snapshot.p50, snapshot.p90, snapshot.p99 = float(p50), float(p90), float(p99)
        return snapshot


class WorkerPool:
    def __init__(self, num_workers: int, queue_depth: int, process_fn: ProcessFn):
        if num_workers < 1 or queue_depth < 1:
            raise InvalidParameterError(
                "Worker pool needs at least one worker and queue slot",
                details={"num_workers": num_workers, "queue_depth": queue_depth},
            )
        self.workers = [FrameWorker(i, queue_depth, process_fn) for i in range(num_workers)]
        self._seq: Dict[int, int] = {}
        self._seq_lock = threading.Lock()
        self._started = False

    @property
    def num_workers(self) -> int:
        return len(self.workers)

    def start(self) -> None:
        if self._started:
            return
        for worker in self.workers:
            worker.start()
        self._started = True
        logger.info(f"Started {self.num_workers} recognition workers")

    def stop(self, timeout: float = 5.0) -> None:
        for worker in self.workers:
            worker.stop()
        if self._started:
            for worker in self.workers:
                worker.join(timeout)
        logger.info("Recognition workers stopped")

    def submit(self, camera_id: int, frame: Image) -> Tuple[int, Future]:
        worker_id = route(camera_id, self.num_workers)
        with self._seq_lock:
            seq = self._seq.get(camera_id, 0)
            self._seq[camera_id] = seq + 1
        future: Future = Future()
        self.workers[worker_id].submit(_Job(camera_id, seq, frame, future, time.perf_counter()))
        return worker_id, future

    def stats(self) -> List[WorkerStats]:
        return [w.stats() for w in self.workers]


def build_streams(config: SimulationConfig, num_frames: int) -> List[CameraStream]:
    """Camera i replays the frame slice starting at i; phases are seeded."""
    rng = np.random.default_rng(config.seed)
    streams = []
    for camera_id in range(config.num_cameras):
        phase = float(rng.uniform(0.0, config.phase_jitter * config.frame_interval))
        frames = tuple((camera_id + k) % num_frames for k in range(num_frames))
        streams.append(CameraStream(camera_id, frames, config.frame_interval, phase))
    return streams


def frame_schedule(config: SimulationConfig, num_frames: int) -> List[Tuple[float, int, int]]:
    """(timestamp, camera id, frame index) for every offered frame, in time order."""
    events = [
        (timestamp, stream.camera_id, frame_index)
        for stream in build_streams(config, num_frames)
        for timestamp, frame_index in stream.schedule(config.duration)
    ]
    return sorted(events)


def simulate(config: SimulationConfig, process_fn: ProcessFn, frames: Sequence[Image]) -> SimulationReport:
    """
    Replay camera streams against a worker pool in-process. The schedule is
    a pure function of the config; latencies are measured wall time.
    """
    if not frames:
        raise InvalidParameterError("Simulation needs at least one frame")
    schedule = frame_schedule(config, len(frames)) if config.duration > 0 else []
    routing = {camera_id: route(camera_id, config.num_workers) for camera_id in range(config.num_cameras)}

    pool = WorkerPool(config.num_workers, config.queue_depth, process_fn)
    pool.start()
    futures = []
    started = time.perf_counter()
    try:
        for timestamp, camera_id, frame_index in schedule:
            if config.time_scale > 0:
                delay = started + timestamp * config.time_scale - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
            futures.append(pool.submit(camera_id, frames[frame_index])[1])
        wait(futures)
        wall = time.perf_counter() - started
        stats = pool.stats()
    finally:
        pool.stop()

    processed = sum(s.frames_processed for s in stats)
    dropped = sum(s.dropped for s in stats)
    logger.info(
        f"Simulated {len(schedule)} frames from {config.num_cameras} cameras on {config.num_workers} workers: "
        f"processed={processed} dropped={dropped} wall={wall:.3f}s"
    )
    return SimulationReport(
        num_cameras=config.num_cameras,
        num_workers=config.num_workers,
        duration=config.duration,
        frames_offered=len(schedule),
        frames_processed=processed,
        frames_dropped=dropped,
        wall_seconds=wall,
        throughput_fps=processed / wall if schedule and wall > 0 else 0.0,
        routing=routing,
        workers=stats,
    )
