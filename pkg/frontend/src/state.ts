// Pure view-state transitions. Network and DOM live in api.ts / ui.ts so
// every rule here is testable with plain objects.

export type Speaker = "user" | "agent" | "notice";

export interface ChatMessage {
  speaker: Speaker;
  text: string;
  agentName: string | null;
}

export interface ChatViewState {
  sessionId: string | null;
  messages: ChatMessage[];
  activeAgent: string | null;
  pending: boolean;
  errorBanner: string | null;
  draft: string;
  ended: boolean;
}

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    messages: [],
    activeAgent: null,
    pending: false,
    errorBanner: null,
    draft: "",
    ended: false,
  };
}

export function canSend(state: ChatViewState, text: string): boolean {
  return (
    state.sessionId !== null &&
    !state.pending &&
    !state.ended &&
    text.trim().length > 0
  );
}

export function sessionStarted(
  state: ChatViewState,
  sessionId: string,
  greeting: string,
  activeAgent: string,
): ChatViewState {
  return {
    ...state,
    sessionId,
    activeAgent,
    errorBanner: null,
    messages: [
      ...state.messages,
      { speaker: "agent", text: greeting, agentName: activeAgent },
    ],
  };
}

export function sessionFailed(state: ChatViewState, message: string): ChatViewState {
  return { ...state, sessionId: null, errorBanner: message };
}

// User bubble appears immediately; the matching reply or a sendFailed must
// follow before the next send (pending gate).
export function sendStarted(state: ChatViewState, text: string): ChatViewState {
  return {
    ...state,
    pending: true,
    errorBanner: null,
    draft: "",
    messages: [
      ...state.messages,
      { speaker: "user", text, agentName: null },
    ],
  };
}

export function replyReceived(
  state: ChatViewState,
  reply: string,
  activeAgent: string,
  ended: boolean,
): ChatViewState {
  const messages = [...state.messages];
  if (state.activeAgent !== null && state.activeAgent !== activeAgent) {
    messages.push({
      speaker: "notice",
      text: `now speaking with ${activeAgent}`,
      agentName: activeAgent,
    });
  }
  messages.push({ speaker: "agent", text: reply, agentName: activeAgent });
  return { ...state, pending: false, activeAgent, ended, messages };
}

// The turn was rejected or lost, so the optimistic bubble comes back out
// (screen order must keep matching the server transcript) and the text
// returns to the draft for retry.
export function sendFailed(state: ChatViewState, message: string): ChatViewState {
  const messages = [...state.messages];
  let draft = state.draft;
  const last = messages[messages.length - 1];
  if (last && last.speaker === "user") {
    messages.pop();
    draft = last.text;
  }
  return { ...state, pending: false, errorBanner: message, messages, draft };
}

export function bannerDismissed(state: ChatViewState): ChatViewState {
  return { ...state, errorBanner: null };
}
