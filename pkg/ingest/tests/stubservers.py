"""HTTP doubles for the reference and chat services.

Each stub owns a loopback ThreadingHTTPServer; tests flip mutable mode
fields on the stub instance to inject failures, and the code under test
only ever sees plain HTTP.  Reference tables and paraphrases are
deterministic, so a rerun of any build against the same stubs produces
identical files.
"""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping
from urllib.parse import parse_qs, urlparse

from axiobench.util import stable_seed

from fixdata import SWAP_RATE, make_prose, stub_paraphrase

Handle = Callable[[str, str, Mapping[str, str], object], tuple[int, object]]


class StubHttpServer:
    """Minimal JSON-over-HTTP server around a handle(method, path,
    query, payload) callable."""

    def __init__(self, handle: Handle):
        outer = self
        self.headers_seen: list[dict] = []

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self) -> None:
                self._run("GET")

            def do_POST(self) -> None:
                self._run("POST")

            def _run(self, method: str) -> None:
                url = urlparse(self.path)
                query = {k: v[-1] for k, v in parse_qs(url.query).items()}
                payload = None
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    payload = json.loads(self.rfile.read(length))
                outer.headers_seen.append(dict(self.headers))
                status, doc = handle(method, url.path, query, payload)
                body = json.dumps(doc).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args) -> None:
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


class RefsStub:
    """Paginated reference endpoint double.

    Serves a per-paper reference table derived from the fixture paper
    index: a sample of same-task earlier papers (which the build links
    to existing corpus entries), a batch of fresh external ids, one
    reference known only by the service's internal id, and a few
    degenerate rows the attach step must shrug off.  Pages are capped
    well below the client's requested limit so pagination is exercised
    on every fetch.
    """

    internal_refs = 8
    external_refs = 16
    page_cap = 10

    def __init__(self, papers: Mapping[str, Mapping]):
        self.papers = dict(papers)
        self.fail_first: dict[str, int] = {}
        self.always_fail: set[str] = set()
        self.unknown: set[str] = set()
        self.calls: list[str] = []
        self.server = StubHttpServer(self._handle)

    @property
    def url(self) -> str:
        return self.server.url

    def close(self) -> None:
        self.server.close()

    def _handle(self, method: str, path: str, query: Mapping[str, str], payload) -> tuple[int, object]:
        if method != "GET" or not path.startswith("/paper/arXiv:") or not path.endswith("/references"):
            return 404, {"error": f"no route for {path}"}
        pid = path[len("/paper/arXiv:"):-len("/references")]
        self.calls.append(pid)
        if self.fail_first.get(pid, 0) > 0:
            self.fail_first[pid] -= 1
            return 500, {"error": "temporary failure"}
        if pid in self.always_fail:
            return 503, {"error": "service unavailable"}
        if pid in self.unknown:
            return 404, {"error": "unknown paper"}
        table = self.reference_items(pid)
        offset = int(query.get("offset", "0"))
        doc: dict = {"data": table[offset:offset + self.page_cap]}
        if offset + self.page_cap < len(table):
            doc["next"] = offset + self.page_cap
        return 200, doc

    def reference_items(self, pid: str) -> list[dict]:
        focal = self.papers.get(pid)
        if focal is None:
            return []
        rng = random.Random(stable_seed("refs-table", pid))
        earlier = sorted(
            other
            for other, rec in self.papers.items()
            if rec["task"] == focal["task"] and rec["year"] < focal["year"]
        )
        items = []
        for other in rng.sample(earlier, min(self.internal_refs, len(earlier))):
            rec = self.papers[other]
            items.append(_item(other, rec["title"], rec["abstract"], rec["year"]))
        for j in range(self.external_refs):
            rid = f"xr-{pid}-{j:02d}"
            title, abstract = make_prose(rid, focal["task"])
            if j == 3:
                abstract = ""
            items.append(_item(rid, title, abstract, focal["year"] - 1 - j % 5))
        s2 = f"h{stable_seed('s2', pid) % 10**8:08d}"
        s2_title, s2_abstract = make_prose(f"s2-{pid}", focal["task"])
        items.append(
            {
                "citedPaper": {
                    "paperId": s2,
                    "externalIds": {},
                    "title": s2_title,
                    "abstract": s2_abstract,
                    "year": focal["year"] - 2,
                }
            }
        )
        items.append(_item(pid, focal["title"], focal["abstract"], focal["year"]))
        items.append(_item(f"xr-{pid}-noyear", "A title without a year", "Some text.", None))
        items.append({"citedPaper": {"paperId": "", "externalIds": {}, "title": "No ids at all", "year": 2019}})
        items.append({"citedPaper": None})
        rng.shuffle(items)
        return items


def _item(arxiv_id: str, title: str, abstract: str, year) -> dict:
    return {
        "citedPaper": {
            "paperId": "p-" + arxiv_id,
            "externalIds": {"ArXiv": arxiv_id},
            "title": title,
            "abstract": abstract,
            "year": year,
        }
    }


class ChatStub:
    """Chat-completions double; ``mode`` selects the behavior."""

    def __init__(self, rate: float = SWAP_RATE):
        self.mode = "normal"  # normal | echo | empty | fail
        self.fail_first = 0
        self.rate = rate
        self.requests: list[dict] = []
        self.server = StubHttpServer(self._handle)

    @property
    def url(self) -> str:
        return self.server.url

    def close(self) -> None:
        self.server.close()

    def _handle(self, method: str, path: str, query: Mapping[str, str], payload) -> tuple[int, object]:
        if method != "POST" or path != "/v1/chat/completions":
            return 404, {"error": f"no route for {path}"}
        self.requests.append(payload)
        if self.fail_first > 0:
            self.fail_first -= 1
            return 500, {"error": "temporary failure"}
        if self.mode == "fail":
            return 502, {"error": "bad gateway"}
        excerpt = payload["messages"][-1]["content"]
        if self.mode == "echo":
            text = excerpt
        elif self.mode == "empty":
            text = "   "
        else:
            text = stub_paraphrase(excerpt, self.rate)
        return 200, {"choices": [{"message": {"content": text}}]}
