import io
import math

import pytest
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from app.core.config import settings
from app.services.imaging import encode_png
from main import create_app

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@pytest.fixture
def client(stub_recognizer):
    with TestClient(create_app(stub_recognizer, num_workers=2, queue_depth=4)) as c:
        yield c


@pytest.fixture
def frame_png(clean_scene):
    frame, _ = clean_scene
    return encode_png(frame)


def upload(client, content, camera_id=0, name="frame.png"):
    return client.post("/recognize", files={"file": (name, content, "image/png")}, data={"camera_id": str(camera_id)})


def test_health(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "workers": 2, "model_loaded": True}


def test_recognize_a_frame(client, frame_png):
    response = upload(client, frame_png, camera_id=3)
    assert response.status_code == 200
    body = response.json()
    assert body["text"] == "29A12345"
    assert body["camera_id"] == 3 and body["worker_id"] == 1
    assert body["detections"][0]["box"] == [0.0, 0.0, 240.0, 160.0]


def test_non_image_is_rejected(client):
    response = upload(client, b"plain text, not a frame", name="frame.txt")
    assert response.status_code == 400
    assert response.json()["error"]["status_code"] == 400


def test_missing_file_is_a_bad_request(client):
    response = client.post("/recognize", data={"camera_id": "0"})
    assert response.status_code == 400
    assert "validation_errors" in response.json()["error"]["details"]


def test_oversized_upload(client):
    content = PNG_SIGNATURE + bytes(settings.MAX_UPLOAD_BYTES)
    assert upload(client, content).status_code == 413


def test_frame_with_too_many_pixels(client):
    side = math.isqrt(settings.MAX_FRAME_PIXELS) + 1
    buffer = io.BytesIO()
    PILImage.new("L", (side, side)).save(buffer, format="PNG")
    content = buffer.getvalue()
    assert len(content) < settings.MAX_UPLOAD_BYTES

    response = upload(client, content)
    assert response.status_code == 413
    assert response.json()["error"]["details"]["max_pixels"] == settings.MAX_FRAME_PIXELS


def test_tiny_frame_is_rejected(client, rng):
    assert upload(client, encode_png(rng.random((20, 20)))).status_code == 400


def test_no_model_is_unavailable(tmp_path, frame_png):
    config = settings.model_copy(update={"PARAMS_DIR": str(tmp_path)})
    with TestClient(create_app(config=config, num_workers=1)) as c:
        assert c.get("/healthz").json()["model_loaded"] is False
        response = upload(c, frame_png)
    assert response.status_code == 503
    assert response.json()["error"]["message"]


def test_stats_account_for_every_request(client, frame_png):
    n = 6
    for camera_id in range(n):
        assert upload(client, frame_png, camera_id=camera_id).status_code == 200
    stats = client.get("/stats").json()
    assert stats["total_processed"] + stats["total_dropped"] == n
    assert sorted(c for w in stats["workers"] for c in w["cameras"]) == list(range(n))
