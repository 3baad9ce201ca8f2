"""Small HTTP JSON client shared by the reference, chat, and embedding
stages: bounded retries with exponential backoff, a minimum interval
between requests, and JSON decoding of responses.

Requests run one at a time.  The pipeline stages are already batched
where it matters (embedding inputs, paginated reference pages), so a
serial rate-limited client keeps the request pattern predictable and
well under any API quota.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.parse
import urllib.request
from typing import Any, Mapping

log = logging.getLogger(__name__)

# HTTP statuses worth retrying: rate limiting and transient server errors.
_RETRY_STATUSES = {429, 500, 502, 503, 504}


class HttpError(Exception):
    """A request that failed for good: exhausted retries or a
    non-retryable status.  Carries the last status code when there was
    one (0 for connection-level failures)."""

    def __init__(self, message: str, status: int = 0):
        super().__init__(message)
        self.status = status


class JsonClient:
    def __init__(
        self,
        base_url: str,
        headers: Mapping[str, str] | None = None,
        interval: float = 0.0,
        retries: int = 3,
        backoff: float = 2.0,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.headers = dict(headers or {})
        self.interval = interval
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._next_allowed = 0.0

    def get(self, path: str, params: Mapping[str, Any] | None = None) -> Any:
        url = self._url(path)
        if params:
            url += "?" + urllib.parse.urlencode(params)
        return self._request(url, body=None)

    def post(self, path: str, payload: Any) -> Any:
        body = json.dumps(payload).encode("utf-8")
        return self._request(self._url(path), body=body)

    def _url(self, path: str) -> str:
        return self.base_url + "/" + path.lstrip("/")

    def _request(self, url: str, body: bytes | None) -> Any:
        last_error = "no attempts made"
        last_status = 0
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff * (2 ** (attempt - 1))
                log.info("retrying %s in %.1fs (attempt %d)", url, delay, attempt + 1)
                time.sleep(delay)
            self._respect_interval()
            try:
                return self._once(url, body)
            except HttpError as exc:
                if exc.status and exc.status not in _RETRY_STATUSES:
                    raise
                last_error = str(exc)
                last_status = exc.status
        raise HttpError(
            f"{url}: giving up after {self.retries + 1} attempts ({last_error})",
            status=last_status,
        )

    def _respect_interval(self) -> None:
        if self.interval <= 0:
            return
        now = time.monotonic()
        if now < self._next_allowed:
            time.sleep(self._next_allowed - now)
        self._next_allowed = time.monotonic() + self.interval

    def _once(self, url: str, body: bytes | None) -> Any:
        headers = dict(self.headers)
        if body is not None:
            headers["Content-Type"] = "application/json"
        req = urllib.request.Request(url, data=body, headers=headers)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            detail = ""
            try:
                detail = exc.read(200).decode("utf-8", "replace").strip()
            except OSError:
                pass
            raise HttpError(
                f"{url}: HTTP {exc.code}" + (f" ({detail})" if detail else ""),
                status=exc.code,
            ) from None
        except urllib.error.URLError as exc:
            raise HttpError(f"{url}: {exc.reason}") from None
        except TimeoutError:
            raise HttpError(f"{url}: timed out after {self.timeout}s") from None
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise HttpError(f"{url}: response is not valid JSON") from None
