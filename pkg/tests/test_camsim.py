import threading
import time
from concurrent.futures import wait

import numpy as np
import pytest

from app.core.error_handlers import FrameDroppedError, InvalidParameterError
from app.schemas.training import SimulationConfig
from app.services.camsim import CameraStream, WorkerPool, frame_schedule, route, simulate

FRAMES = [np.full((4, 4), v) for v in (0.1, 0.2, 0.3)]


def instant(frame):
    return float(frame.mean())


def sleeper(seconds):
    def process(frame):
        time.sleep(seconds)
        return float(frame.mean())
    return process


def conserved(stats):
    return stats.accepted == stats.frames_processed + stats.queue_depth + stats.dropped + stats.in_flight


def test_route():
    assert [route(c, 3) for c in range(7)] == [0, 1, 2, 0, 1, 2, 0]
    with pytest.raises(InvalidParameterError):
        route(1, 0)


def test_camera_schedule_loops_over_its_frames():
    stream = CameraStream(0, (2, 0), frame_interval=0.5)
    assert stream.schedule(1.5) == [(0.0, 2), (0.5, 0), (1.0, 2)]
    with pytest.raises(InvalidParameterError):
        CameraStream(0, (), frame_interval=0.5)


def test_schedule_is_a_pure_function_of_the_config():
    config = SimulationConfig(num_cameras=5, num_workers=2, duration=3.0, frame_interval=0.5)
    assert frame_schedule(config, 3) == frame_schedule(config, 3)
    timestamps = [t for t, _, _ in frame_schedule(config, 3)]
    assert timestamps == sorted(timestamps)


def test_thirty_cameras_on_ten_workers():
    config = SimulationConfig(num_cameras=30, num_workers=10, duration=2.0, frame_interval=0.5, time_scale=0.0, queue_depth=16)
    report = simulate(config, instant, FRAMES)
    assert report.frames_offered == 120
    assert report.frames_processed == 120 and report.frames_dropped == 0
    for stats in report.workers:
        assert stats.cameras == [stats.worker_id, stats.worker_id + 10, stats.worker_id + 20]
        assert conserved(stats)
    assert all(report.routing[c] == c % 10 for c in range(30))


def test_zero_duration_offers_nothing():
    config = SimulationConfig(num_cameras=4, num_workers=2, duration=0.0, time_scale=0.0)
    report = simulate(config, instant, FRAMES)
    assert (report.frames_offered, report.frames_processed, report.throughput_fps) == (0, 0, 0.0)


def test_frames_of_one_camera_stay_in_order():
    pool = WorkerPool(2, 100, instant)
    pool.start()
    try:
        futures = [pool.submit(camera_id, FRAMES[0])[1] for _ in range(10) for camera_id in range(4)]
        wait(futures)
    finally:
        pool.stop()
    for worker in pool.workers:
        for camera_id, seqs in worker.order.items():
            assert seqs == list(range(10))
            assert route(camera_id, 2) == worker.worker_id


def test_full_queue_drops_the_oldest_frame():
    release = threading.Event()

    def blocking(frame):
        release.wait(5.0)
        return float(frame.mean())

    pool = WorkerPool(1, 1, blocking)
    pool.start()
    try:
        _, first = pool.submit(0, FRAMES[0])
        deadline = time.monotonic() + 5.0
        while pool.stats()[0].in_flight != 1 and time.monotonic() < deadline:
            time.sleep(0.001)
        _, second = pool.submit(0, FRAMES[1])
        _, third = pool.submit(0, FRAMES[2])
        with pytest.raises(FrameDroppedError):
            second.result(timeout=5.0)
        release.set()
        assert first.result(timeout=5.0) == pytest.approx(0.1)
        assert third.result(timeout=5.0) == pytest.approx(0.3)
        stats = pool.stats()[0]
    finally:
        release.set()
        pool.stop()
    assert (stats.accepted, stats.frames_processed, stats.dropped) == (3, 2, 1)
    assert conserved(stats)


def test_worker_errors_are_counted():
    def failing(frame):
        raise ValueError("bad frame")

    pool = WorkerPool(1, 4, failing)
    pool.start()
    try:
        _, future = pool.submit(0, FRAMES[0])
        with pytest.raises(ValueError):
            future.result(timeout=5.0)
        stats = pool.stats()[0]
    finally:
        pool.stop()
    assert stats.errors == 1 and stats.frames_processed == 1


def test_more_workers_do_not_raise_median_latency():
    def median_latency(num_workers):
        config = SimulationConfig(
            num_cameras=30, num_workers=num_workers, duration=2.0, frame_interval=0.5, time_scale=0.0, queue_depth=100
        )
        report = simulate(config, sleeper(0.005), FRAMES)
        assert report.frames_dropped == 0
        return float(np.mean([w.p50 for w in report.workers]))

    assert median_latency(20) <= median_latency(10) * 1.2
