"""HTTP surface over the portal, for browsers and the serve subcommand."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .portal import Busy, InternalError, Portal, SessionClosed, UnknownSession


class UtteranceBody(BaseModel):
    text: str


def create_app(portal: Portal) -> FastAPI:
    app = FastAPI(title="parley portal", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.portal = portal

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "agent": portal.agent_name}

    @app.post("/api/session")
    def create_session() -> dict:
        return portal.create_session()

    @app.post("/api/session/{session_id}/utterance")
    def post_utterance(session_id: str, body: UtteranceBody) -> dict:
        try:
            turn = portal.post_utterance(session_id, body.text)
        except UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session") from None
        except Busy:
            raise HTTPException(status_code=409, detail="turn already in flight") from None
        except SessionClosed:
            raise HTTPException(status_code=409, detail="session closed") from None
        except InternalError as exc:
            raise HTTPException(
                status_code=500,
                detail={"error": "internal", "correlation_id": exc.correlation_id},
            ) from None
        return {
            "reply": turn.reply,
            "active_agent": turn.active_agent,
            "ended": turn.ended,
        }

    @app.get("/api/session/{session_id}/transcript")
    def get_transcript(session_id: str) -> dict:
        try:
            turns = portal.get_transcript(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session") from None
        return {"session_id": session_id, "turns": turns}

    return app


def serve(portal: Portal, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(portal), host=host, port=port, log_level="warning")
