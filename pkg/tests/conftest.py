import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))
import fake_model  # noqa: E402

FAKE_MODEL = Path(__file__).parent / "fake_model.py"


def fake_model_cmd(behavior, n):
    return [sys.executable, str(FAKE_MODEL), behavior, str(n)]


@pytest.fixture
def fake_http_server():
    """Serve the fake-model protocol over HTTP; yields a base-url factory."""
    servers = []

    def start(behavior, n):
        class Handler(BaseHTTPRequestHandler):
            def _send(self, obj, code=200):
                body = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/hello":
                    self._send({"input_dim": n,
                                "output_dim": fake_model.output_dim(behavior, n)})
                else:
                    self._send({"error": "not found"}, code=404)

            def do_POST(self):
                if self.path != "/eval":
                    self._send({"error": "not found"}, code=404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                msg = json.loads(self.rfile.read(length))
                self._send({"outputs": fake_model.compute(behavior, msg["inputs"])})

            def log_message(self, *a):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
