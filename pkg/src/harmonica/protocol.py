"""Adapters for models that live outside the process.

Both backends speak one message format, UTF-8 JSON, one object per message:

    handshake   {"op": "hello"}              -> {"input_dim": n, "output_dim": m}
    evaluation  {"op": "eval", "inputs": [[...], ...]} -> {"outputs": [[...], ...]}

The subprocess backend exchanges newline-delimited objects over stdio; the
HTTP backend sends the same bodies to GET /hello and POST /eval.  At
handshake time a probe input is evaluated twice; models that disagree with
themselves are rejected, since the deviation metric is meaningless for a
stochastic function.
"""

import json
import selectors
import shlex
import subprocess
import threading
import urllib.error
import urllib.request

import numpy as np

from .errors import BackendError
from .models import Model


def _check_reply(obj, key, count, dim):
    rows = obj.get(key)
    if not isinstance(rows, list) or len(rows) != count:
        raise BackendError(f"protocol reply carries {0 if rows is None else len(rows)} "
                           f"'{key}' rows, expected {count}", diagnostics=obj)
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise BackendError(f"protocol reply rows have shape {arr.shape}, expected "
                           f"(*, {dim})", diagnostics=obj)
    return arr


class SubprocessModel(Model):
    """Runs the model as a child process speaking NDJSON on stdio."""

    backend = "subprocess"
    max_concurrency = 1  # one stdio pipe; callers queue behind a lock

    def __init__(self, command, timeout=30.0, domain=None, expect_dims=None):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.timeout = float(timeout)
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True, bufsize=1)
        except OSError as exc:
            raise BackendError(f"cannot start model process {self.command}: {exc}") from exc
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

        hello = self._roundtrip({"op": "hello"})
        try:
            n, m = int(hello["input_dim"]), int(hello["output_dim"])
        except (KeyError, TypeError, ValueError):
            self.close()
            raise BackendError("handshake reply missing input_dim/output_dim",
                               diagnostics=hello) from None
        if expect_dims is not None:
            en, em = expect_dims
            if (en is not None and en != n) or (em is not None and em != m):
                self.close()
                raise BackendError(f"endpoint declares dims ({n}, {m}), "
                                   f"expected ({en}, {em})")
        super().__init__(n, m, domain)
        _determinism_probe(self)

    def _read_line(self):
        deadline = self.timeout
        if self._proc.poll() is not None:
            raise BackendError("model process exited "
                               f"(code {self._proc.returncode})",
                               diagnostics=self._stderr_tail())
        events = self._selector.select(timeout=deadline)
        if not events:
            raise BackendError(f"model process reply timed out after {self.timeout}s")
        line = self._proc.stdout.readline()
        if not line:
            raise BackendError("model process closed its output",
                               diagnostics=self._stderr_tail())
        return line

    def _stderr_tail(self):
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            return self._proc.stderr.read()[-2000:]
        except (OSError, ValueError):
            return None

    def _roundtrip(self, message):
        with self._lock:
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                raise BackendError(f"cannot write to model process: {exc}",
                                   diagnostics=self._stderr_tail()) from exc
            line = self._read_line()
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"model process sent malformed JSON: {exc.msg}",
                               diagnostics=line[:2000]) from exc

    def _eval_batch(self, X):
        reply = self._roundtrip({"op": "eval", "inputs": X.tolist()})
        return _check_reply(reply, "outputs", X.shape[0], self.output_dim)

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


class HttpModel(Model):
    """Talks to a model served at {url}/hello and {url}/eval."""

    backend = "http"

    def __init__(self, url, timeout=30.0, domain=None, expect_dims=None):
        self.url = url.rstrip("/")
        self.timeout = float(timeout)
        hello = self._request("GET", "/hello")
        try:
            n, m = int(hello["input_dim"]), int(hello["output_dim"])
        except (KeyError, TypeError, ValueError):
            raise BackendError("handshake reply missing input_dim/output_dim",
                               diagnostics=hello) from None
        if expect_dims is not None:
            en, em = expect_dims
            if (en is not None and en != n) or (em is not None and em != m):
                raise BackendError(f"endpoint declares dims ({n}, {m}), "
                                   f"expected ({en}, {em})")
        super().__init__(n, m, domain)
        _determinism_probe(self)

    def _request(self, method, path, body=None):
        data = None if body is None else json.dumps(body).encode("utf-8")
        req = urllib.request.Request(self.url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            raise BackendError(f"model endpoint returned HTTP {exc.code} for {path}",
                               diagnostics=exc.read()[:2000]) from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BackendError(f"cannot reach model endpoint {self.url}{path}: {exc}") from exc
        try:
            return json.loads(payload)
        except json.JSONDecodeError as exc:
            raise BackendError(f"model endpoint sent malformed JSON: {exc.msg}",
                               diagnostics=payload[:2000]) from exc

    def _eval_batch(self, X):
        reply = self._request("POST", "/eval", {"op": "eval", "inputs": X.tolist()})
        return _check_reply(reply, "outputs", X.shape[0], self.output_dim)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _determinism_probe(model):
    """Evaluate one probe input twice; reject models that disagree."""
    probe = np.zeros(model.input_dim)
    if model.domain is not None:
        if model.domain.lower is not None and model.domain.upper is not None:
            probe = (model.domain.lower + model.domain.upper) / 2.0 * np.ones(model.input_dim)
        probe = model.domain.prepare(probe[None, :])[0]
    out = model.eval_batch(np.stack([probe, probe]))
    if not np.array_equal(out[0], out[1]):
        model.close()
        raise BackendError(
            "model is not deterministic: identical probe inputs produced "
            "different outputs; the deviation metric is undefined for "
            "stochastic functions", diagnostics=out.tolist())


def connect_external(endpoint, n=None, m=None, timeout=30.0, domain=None):
    """Open a handle on an external model.

    ``endpoint`` starting with http:// or https:// selects the HTTP backend,
    anything else is run as a subprocess command line.  ``n``/``m``, when
    given, are validated against the handshake before any evaluation.
    """
    expect = None if n is None and m is None else (n, m)
    if isinstance(endpoint, str) and endpoint.startswith(("http://", "https://")):
        return HttpModel(endpoint, timeout=timeout, domain=domain, expect_dims=expect)
    return SubprocessModel(endpoint, timeout=timeout, domain=domain, expect_dims=expect)
