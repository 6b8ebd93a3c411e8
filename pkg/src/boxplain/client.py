"""Thin HTTP client over the session API.

The interactive CLI speaks only this protocol, either to a remote server or
to an in-process app over a test transport, so the terminal front end stays a
pure client of the service.
"""

from __future__ import annotations

import time
from typing import Any

import httpx


class ApiError(RuntimeError):
    def __init__(self, status: int, body: dict):
        self.status = status
        self.body = body
        detail = body.get("error") or body
        super().__init__(f"HTTP {status}: {detail}")

    @property
    def violations(self) -> list[str]:
        return list(self.body.get("violations", []))


class ApiClient:
    """Minimal wrapper: create a session, ask, steer, read back."""

    def __init__(self, http, poll_interval: float = 0.25):
        self._http = http  # anything with .get/.post returning httpx-style responses
        self._poll = poll_interval
        self.session_id: str | None = None

    @classmethod
    def remote(cls, base_url: str) -> "ApiClient":
        return cls(httpx.Client(base_url=base_url, timeout=600.0))

    @classmethod
    def in_process(cls, app) -> "ApiClient":
        from fastapi.testclient import TestClient

        return cls(TestClient(app))

    def _unwrap(self, resp) -> dict:
        if resp.status_code >= 400:
            raise ApiError(resp.status_code, resp.json())
        return resp.json()

    def _await_ready(self, payload: dict) -> dict:
        while payload.get("status") == "pending":
            time.sleep(self._poll)
            payload = self._unwrap(self._http.get(f"/sessions/{self.session_id}/description"))
        return payload

    def create_session(self, pack: str, model: str, epsilon0: float, seed: int = 0) -> str:
        data = self._unwrap(
            self._http.post(
                "/sessions",
                json={"v": 1, "pack": pack, "model": model, "epsilon0": epsilon0, "seed": seed},
            )
        )
        self.session_id = data["id"]
        return data["id"]

    def upload_pack(self, pack_json: dict) -> str:
        return self._unwrap(self._http.post("/packs", json=pack_json))["id"]

    def upload_model(self, model_id: str, model_json: dict) -> str:
        return self._unwrap(
            self._http.post("/models", json={"v": 1, "id": model_id, "model": model_json})
        )["id"]

    def ask(self, qtype: str, strength: str, dnf: list[list[str]]) -> dict:
        payload = self._unwrap(
            self._http.post(
                f"/sessions/{self.session_id}/question",
                json={"v": 1, "type": qtype, "strength": strength, "dnf": dnf},
            )
        )
        return self._await_ready(payload)

    def respond(self, kind: str, arg: str | None = None) -> dict:
        payload = self._unwrap(
            self._http.post(
                f"/sessions/{self.session_id}/response",
                json={"v": 1, "kind": kind, "arg": arg},
            )
        )
        return self._await_ready(payload)

    def description(self) -> dict:
        return self._await_ready(
            self._unwrap(self._http.get(f"/sessions/{self.session_id}/description"))
        )

    def history(self) -> dict:
        return self._unwrap(self._http.get(f"/sessions/{self.session_id}/history"))

    def predicates(self, pack: str, question_type: str | None = None) -> list[dict]:
        url = f"/packs/{pack}/predicates"
        if question_type:
            url += f"?questionType={question_type}"
        return self._unwrap(self._http.get(url))["predicates"]
