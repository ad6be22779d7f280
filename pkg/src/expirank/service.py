"""HTTP serving layer: threshold and signal endpoints plus health.

Thin and fail-safe: malformed input gets a 400 with itemized field
errors; pipeline trouble never surfaces as a 5xx because the threshold
path degrades to the fallback tier and the response says so in its
provenance field.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

from .config import EngineConfig
from .corpus import Document
from .extraction import decay_rate
from .pipeline import compute_verdict
from .signal import expiry_flag, get_threshold
from .timepoint import TimePoint

__all__ = ["ExpiryService", "build_server", "MAX_BODY_BYTES"]

log = logging.getLogger("expirank.service")

MAX_BODY_BYTES = 1 << 20


@dataclass
class _Parsed:
    """Validated request payload or the errors that sank it."""

    values: dict
    errors: list


class ExpiryService:
    """Holds the engine components and answers endpoint requests."""

    def __init__(self, config: EngineConfig, documents: Sequence[Document] = ()):
        self.config = config
        self.rule_table = config.make_rule_table()
        self.parser = config.make_parser()
        self.stopwords = config.make_stopwords()
        self.backend = config.make_backend(self.rule_table, self.parser)
        self.cache = config.make_cache()
        self.breaker = config.make_breaker()
        self.documents = list(documents)

    # -- pipeline ----------------------------------------------------------

    def _pipeline(self, query: str, search_time: TimePoint):
        cfg = self.config
        result = compute_verdict(
            query,
            self.documents,
            search_time,
            backend=self.backend,
            rule_table=self.rule_table,
            parser=self.parser,
            samples=cfg.samples,
            window=cfg.window,
            alpha=cfg.alpha,
            tau=cfg.tau,
            decay_per_day=decay_rate(cfg.half_life_days),
            h_norm=cfg.h_norm_days,
            lambda1=cfg.lambda1,
            lambda2=cfg.lambda2,
            max_candidate_docs=cfg.max_candidate_docs,
            stopwords=self.stopwords,
        )
        return result.verdict.t_exp, result.verdict.s_self

    # -- endpoint bodies ----------------------------------------------------

    def threshold(self, query: str, search_time: TimePoint) -> dict:
        t_exp, provenance, s_self = get_threshold(
            query,
            search_time,
            self.cache,
            self._pipeline,
            self.breaker,
            past_bound_days=self.config.sanity_past_days,
            future_bound_days=self.config.sanity_future_days,
        )
        return {
            "t_exp": t_exp.render() if t_exp is not None else None,
            "provenance": provenance,
            "s_self": s_self,
        }

    def signal(self, query: str, doc_time: TimePoint, search_time: TimePoint) -> dict:
        t_exp, provenance, _ = get_threshold(
            query,
            search_time,
            self.cache,
            self._pipeline,
            self.breaker,
            past_bound_days=self.config.sanity_past_days,
            future_bound_days=self.config.sanity_future_days,
        )
        f_exp = expiry_flag(doc_time, t_exp) if t_exp is not None else 0
        return {
            "f_exp": f_exp,
            "t_exp_used": t_exp.render() if t_exp is not None else None,
            "provenance": provenance,
            "breaker_state": self.breaker.state,
        }

    def health(self) -> dict:
        return {
            "status": "ok",
            "breaker": self.breaker.snapshot(),
            "cache_entries": len(self.cache),
            "corpus_documents": len(self.documents),
        }

    def force_breaker(self, state: str) -> dict:
        if state == "open":
            self.breaker.force_open()
        else:
            self.breaker.force_close()
        return {"state": self.breaker.state}


def _validate(raw: dict, fields: dict) -> _Parsed:
    """Check required fields; fields maps name -> 'str' | 'time'."""
    values: dict = {}
    errors: list = []
    for name, kind in fields.items():
        if name not in raw:
            errors.append(f"missing field: {name}")
            continue
        value = raw[name]
        if kind == "str":
            if not isinstance(value, str) or not value.strip():
                errors.append(f"field {name} must be a non-empty string")
            else:
                values[name] = value
        else:
            if not isinstance(value, str):
                errors.append(f"field {name} must be a date string")
                continue
            try:
                values[name] = TimePoint.parse_canonical(value)
            except ValueError as exc:
                errors.append(f"field {name}: {exc}")
    return _Parsed(values, errors)


class _Handler(BaseHTTPRequestHandler):
    server: "ExpiryServer"

    # Keep request logging on our logger, off stderr.
    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> tuple[dict | None, list]:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length <= 0:
            return None, ["empty request body"]
        if length > MAX_BODY_BYTES:
            return None, ["request body too large"]
        raw = self.rfile.read(length)
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return None, [f"body is not valid JSON: {exc}"]
        if not isinstance(parsed, dict):
            return None, ["body must be a JSON object"]
        return parsed, []

    def do_GET(self) -> None:  # noqa: N802 (http.server contract)
        if self.path == "/healthz":
            self._send(200, self.server.service.health())
        else:
            self._send(404, {"errors": [f"unknown path: {self.path}"]})

    def do_POST(self) -> None:  # noqa: N802 (http.server contract)
        service = self.server.service
        raw, errors = self._read_json()
        if raw is None:
            self._send(400, {"errors": errors})
            return

        if self.path == "/v1/threshold":
            parsed = _validate(raw, {"query": "str", "search_time": "time"})
            if parsed.errors:
                self._send(400, {"errors": parsed.errors})
                return
            self._send(200, service.threshold(
                parsed.values["query"], parsed.values["search_time"]
            ))
        elif self.path == "/v1/signal":
            parsed = _validate(
                raw,
                {"query": "str", "doc_time": "time", "search_time": "time"},
            )
            if parsed.errors:
                self._send(400, {"errors": parsed.errors})
                return
            self._send(200, service.signal(
                parsed.values["query"],
                parsed.values["doc_time"],
                parsed.values["search_time"],
            ))
        elif self.path == "/v1/breaker/force":
            if not service.config.allow_breaker_force:
                # Invisible unless explicitly enabled; a test-only hook.
                self._send(404, {"errors": [f"unknown path: {self.path}"]})
                return
            state = raw.get("state")
            if state not in ("open", "closed"):
                self._send(400, {"errors": ["field state must be 'open' or 'closed'"]})
                return
            self._send(200, service.force_breaker(state))
        else:
            self._send(404, {"errors": [f"unknown path: {self.path}"]})


class ExpiryServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple, service: ExpiryService):
        super().__init__(address, _Handler)
        self.service = service


def build_server(service: ExpiryService, host: str | None = None,
                 port: int | None = None) -> ExpiryServer:
    """Bind the service; the OSError from a taken port propagates."""
    cfg = service.config
    return ExpiryServer(
        (host if host is not None else cfg.host,
         port if port is not None else cfg.port),
        service,
    )
