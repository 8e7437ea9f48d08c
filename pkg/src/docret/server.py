"""Read-only search service over a dense index.

GET /healthz -> 200 "ok"; POST /search {"query", "k", "mode"} returns the
ranked hits. The index is immutable, so concurrent requests need no
locking; 503 is returned until the index has finished loading.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import DocretError
from .scoring import search_dense


def create_app(index=None, provider=None) -> FastAPI:
    app = FastAPI()
    app.state.index = index
    app.state.provider = provider

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.post("/search")
    async def search(request: Request):
        if app.state.index is None or app.state.provider is None:
            return JSONResponse({"error": "index loading"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or "query" not in body:
            return JSONResponse({"error": "body must be an object with a 'query' field"}, status_code=400)
        query = body["query"]
        k = body.get("k", 10)
        mode = body.get("mode", "exact")
        if not isinstance(query, str) or not query.strip():
            return JSONResponse({"error": "'query' must be non-empty text"}, status_code=400)
        if not isinstance(k, int) or k < 1:
            return JSONResponse({"error": "'k' must be a positive integer"}, status_code=400)
        if mode not in ("exact", "ann"):
            return JSONResponse({"error": "'mode' must be 'exact' or 'ann'"}, status_code=400)
        try:
            q = app.state.provider.embed_text(query)
            hits = search_dense(app.state.index, q, k, mode=mode)
        except DocretError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {
            "results": [
                {"id": h.doc, "score": h.score, "rank": rank}
                for rank, h in enumerate(hits, start=1)
            ]
        }

    return app
