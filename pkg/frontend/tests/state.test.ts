import { describe, expect, it } from "vitest";

import {
  ChatViewState,
  bannerDismissed,
  canSend,
  initialState,
  replyReceived,
  sendFailed,
  sendStarted,
  sessionFailed,
  sessionStarted,
} from "../src/state.js";

function started(): ChatViewState {
  return sessionStarted(initialState(), "sid-1", "Hi, I am porter.", "porter");
}

describe("session start", () => {
  it("appends the greeting attributed to the portal agent", () => {
    const state = started();
    expect(state.sessionId).toBe("sid-1");
    expect(state.activeAgent).toBe("porter");
    expect(state.messages).toEqual([
      { speaker: "agent", text: "Hi, I am porter.", agentName: "porter" },
    ]);
    expect(state.errorBanner).toBeNull();
    expect(state.pending).toBe(false);
  });

  it("failure keeps no session and raises the banner", () => {
    const state = sessionFailed(initialState(), "portal unreachable");
    expect(state.sessionId).toBeNull();
    expect(state.errorBanner).toBe("portal unreachable");
    expect(state.messages).toEqual([]);
  });

  it("retry after recovery starts cleanly", () => {
    const failed = sessionFailed(initialState(), "portal unreachable");
    const state = sessionStarted(failed, "sid-2", "hello", "porter");
    expect(state.sessionId).toBe("sid-2");
    expect(state.errorBanner).toBeNull();
  });
});

describe("canSend", () => {
  it("requires a session, idle state, an open dialog, and real text", () => {
    const state = started();
    expect(canSend(state, "hi")).toBe(true);
    expect(canSend(initialState(), "hi")).toBe(false);
    expect(canSend({ ...state, pending: true }, "hi")).toBe(false);
    expect(canSend({ ...state, ended: true }, "hi")).toBe(false);
    expect(canSend(state, "")).toBe(false);
    expect(canSend(state, "   ")).toBe(false);
  });
});

describe("send and reply", () => {
  it("appends the user bubble immediately and gates on pending", () => {
    const state = sendStarted(started(), "weather please");
    expect(state.pending).toBe(true);
    expect(state.messages.at(-1)).toEqual({
      speaker: "user",
      text: "weather please",
      agentName: null,
    });
    expect(canSend(state, "again")).toBe(false);
  });

  it("reply with the same agent adds no notice line", () => {
    const state = replyReceived(sendStarted(started(), "hi"), "Which city?", "porter", false);
    expect(state.pending).toBe(false);
    expect(state.messages.map((m) => m.speaker)).toEqual(["agent", "user", "agent"]);
  });

  it("agent change inserts exactly one notice line before the reply", () => {
    const state = replyReceived(
      sendStarted(started(), "restaurant"),
      "Let me connect you with bistro.",
      "bistro",
      false,
    );
    const tail = state.messages.slice(-2);
    expect(tail[0]).toEqual({
      speaker: "notice",
      text: "now speaking with bistro",
      agentName: "bistro",
    });
    expect(tail[1]?.agentName).toBe("bistro");
    expect(state.activeAgent).toBe("bistro");
  });

  it("handback announces the portal agent again", () => {
    let state = replyReceived(sendStarted(started(), "restaurant"), "ok", "bistro", false);
    state = replyReceived(sendStarted(state, "cheap"), "done", "porter", false);
    const notices = state.messages.filter((m) => m.speaker === "notice");
    expect(notices.map((m) => m.text)).toEqual([
      "now speaking with bistro",
      "now speaking with porter",
    ]);
  });

  it("an ended reply closes the dialog for further sends", () => {
    const state = replyReceived(sendStarted(started(), "bye"), "Goodbye.", "porter", true);
    expect(state.ended).toBe(true);
    expect(canSend(state, "more")).toBe(false);
  });
});

describe("send failure", () => {
  it("removes the optimistic bubble and restores the draft", () => {
    const before = started();
    const state = sendFailed(sendStarted(before, "my message"), "turn already in flight");
    expect(state.pending).toBe(false);
    expect(state.errorBanner).toBe("turn already in flight");
    expect(state.messages).toEqual(before.messages);
    expect(state.draft).toBe("my message");
  });

  it("dismissing the banner keeps everything else", () => {
    const failed = sendFailed(sendStarted(started(), "text"), "boom");
    const state = bannerDismissed(failed);
    expect(state.errorBanner).toBeNull();
    expect(state.draft).toBe("text");
  });
});
