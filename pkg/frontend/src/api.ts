// Thin typed client over the portal HTTP surface.

export interface SessionCreated {
  session_id: string;
  reply: string;
  active_agent: string;
}

export interface TurnReply {
  reply: string;
  active_agent: string;
  ended: boolean;
}

export interface TranscriptTurn {
  turn: number;
  user_text: string | null;
  acts: [string, unknown][];
  agent: string;
  touched: [string, string][];
  report: Record<string, unknown> | null;
}

export class PortalRequestError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "PortalRequestError";
  }
}

function detailText(status: number, body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    if (detail && typeof detail === "object") return JSON.stringify(detail);
  }
  return `request failed with status ${status}`;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch {
    throw new PortalRequestError(0, "portal unreachable");
  }
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    throw new PortalRequestError(response.status, detailText(response.status, body));
  }
  return body as T;
}

export class PortalClient {
  constructor(readonly baseUrl: string = "") {}

  createSession(): Promise<SessionCreated> {
    return request(`${this.baseUrl}/api/session`, { method: "POST" });
  }

  sendUtterance(sessionId: string, text: string): Promise<TurnReply> {
    return request(`${this.baseUrl}/api/session/${sessionId}/utterance`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  async transcript(sessionId: string): Promise<TranscriptTurn[]> {
    const payload = await request<{ turns: TranscriptTurn[] }>(
      `${this.baseUrl}/api/session/${sessionId}/transcript`,
    );
    return payload.turns;
  }
}
