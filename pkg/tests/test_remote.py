import json
import socket
import socketserver
import threading

import numpy as np
import pytest

from advtrack.trackers import ProtocolError, RemoteTracker
from advtrack.video import load_frame
from tests.conftest import flat_video


class _EchoHandler(socketserver.StreamRequestHandler):
    """Minimal in-process tracker server: echo backend over the wire
    protocol (init box repeated for every frame)."""

    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                return
            try:
                req = json.loads(line)
            except json.JSONDecodeError:
                self._send({"error": "bad json"})
                continue
            cmd = req.get("cmd")
            if cmd == "hello":
                self._send({"proto": 1, "name": "echo", "parallel": False})
            elif cmd == "track":
                n = int(req["num_frames"])
                frame0 = load_frame(f"{req['frames_dir']}/00000000.png")
                self.server.seen_frames.append(frame0)
                box = req["init_box"]
                self._send({"boxes": [box] * n, "scores": [1.0] * n})
            elif cmd == "shutdown":
                self._send({"ok": True})
                return
            else:
                self._send({"error": f"unknown command {cmd!r}"})

    def _send(self, obj):
        self.wfile.write(json.dumps(obj).encode() + b"\n")
        self.wfile.flush()


@pytest.fixture
def echo_server():
    server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _EchoHandler)
    server.seen_frames = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


class TestRemoteTracker:
    def test_handshake_and_track(self, echo_server, tmp_path):
        port = echo_server.server_address[1]
        t = RemoteTracker(f"127.0.0.1:{port}", str(tmp_path))
        assert t.name == "echo"
        v = flat_video(3)
        res = t.track(v, v.gt_boxes[0])
        assert len(res) == 3
        assert res.boxes[1] == v.gt_boxes[0]
        assert t.query_count == 1
        # the server decoded the exact frame bytes we sent
        assert np.array_equal(echo_server.seen_frames[0], v.frames[0])
        t.close()

    def test_bad_address_rejected(self, tmp_path):
        with pytest.raises(ProtocolError):
            RemoteTracker("nonsense", str(tmp_path))

    def test_error_reply_raises(self, echo_server, tmp_path):
        port = echo_server.server_address[1]
        t = RemoteTracker(f"127.0.0.1:{port}", str(tmp_path))
        with pytest.raises(ProtocolError):
            t._request({"cmd": "bogus"})
        t.close()

    def test_malformed_reply_raises(self, tmp_path):
        srv = socket.socket()
        srv.bind(("127.0.0.1", 0))
        srv.listen(1)
        port = srv.getsockname()[1]

        def bad_server():
            conn, _ = srv.accept()
            conn.recv(4096)
            conn.sendall(b"not json\n")
            conn.close()

        thread = threading.Thread(target=bad_server, daemon=True)
        thread.start()
        with pytest.raises(ProtocolError):
            RemoteTracker(f"127.0.0.1:{port}", str(tmp_path))
        srv.close()

    def test_unchanged_tail_written_once(self, echo_server, tmp_path):
        import os

        port = echo_server.server_address[1]
        t = RemoteTracker(f"127.0.0.1:{port}", str(tmp_path))
        v = flat_video(3)
        t.track(v, v.gt_boxes[0])
        frame1 = os.path.join(str(tmp_path), "frames", "00000001.png")
        first_mtime = os.stat(frame1).st_mtime_ns
        t.track(v, v.gt_boxes[0])
        assert os.stat(frame1).st_mtime_ns == first_mtime
        t.close()
