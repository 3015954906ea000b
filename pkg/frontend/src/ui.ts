// DOM wiring: builds the widget, renders ChatViewState, drives PortalClient.

import { PortalClient, PortalRequestError } from "./api.js";
import {
  ChatViewState,
  canSend,
  initialState,
  replyReceived,
  sendFailed,
  sendStarted,
  sessionFailed,
  sessionStarted,
} from "./state.js";

export interface ChatElements {
  root: HTMLElement;
  badge: HTMLElement;
  messages: HTMLElement;
  banner: HTMLElement;
  bannerText: HTMLElement;
  retry: HTMLButtonElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
}

export function mount(root: HTMLElement): ChatElements {
  root.innerHTML = `
    <div class="chat-header">
      <span class="chat-title">parley</span>
      <span class="agent-badge" data-agent=""></span>
    </div>
    <div class="chat-banner" hidden>
      <span class="banner-text"></span>
      <button class="banner-retry" type="button">Retry</button>
    </div>
    <div class="chat-messages"></div>
    <div class="chat-input-bar">
      <input class="chat-input" type="text" placeholder="Type a message" autocomplete="off">
      <button class="chat-send" type="button">Send</button>
    </div>`;
  const pick = <T extends HTMLElement>(selector: string): T => {
    const el = root.querySelector<T>(selector);
    if (!el) throw new Error(`missing element ${selector}`);
    return el;
  };
  return {
    root,
    badge: pick(".agent-badge"),
    messages: pick(".chat-messages"),
    banner: pick(".chat-banner"),
    bannerText: pick(".banner-text"),
    retry: pick<HTMLButtonElement>(".banner-retry"),
    input: pick<HTMLInputElement>(".chat-input"),
    send: pick<HTMLButtonElement>(".chat-send"),
  };
}

export class ChatController {
  state: ChatViewState = initialState();

  constructor(
    private readonly client: PortalClient,
    private readonly el: ChatElements,
  ) {
    el.send.addEventListener("click", () => void this.send());
    el.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        void this.send();
      }
    });
    el.retry.addEventListener("click", () => void this.retry());
    this.render();
  }

  async start(): Promise<void> {
    try {
      const created = await this.client.createSession();
      this.state = sessionStarted(
        this.state,
        created.session_id,
        created.reply,
        created.active_agent,
      );
    } catch (err) {
      this.state = sessionFailed(this.state, describe(err));
    }
    this.render();
  }

  async send(): Promise<void> {
    const text = this.el.input.value.trim();
    if (!canSend(this.state, text)) return;
    const sessionId = this.state.sessionId as string;
    this.state = sendStarted(this.state, text);
    this.el.input.value = "";
    this.render();
    try {
      const turn = await this.client.sendUtterance(sessionId, text);
      this.state = replyReceived(this.state, turn.reply, turn.active_agent, turn.ended);
    } catch (err) {
      this.state = sendFailed(this.state, describe(err));
      this.el.input.value = this.state.draft;
    }
    this.render();
  }

  async retry(): Promise<void> {
    if (this.state.sessionId === null) {
      await this.start();
    } else {
      await this.send();
    }
  }

  render(): void {
    const { state, el } = this;
    el.badge.textContent = state.activeAgent ?? "connecting";
    el.badge.dataset.agent = state.activeAgent ?? "";
    el.root.dataset.agent = state.activeAgent ?? "";

    el.messages.replaceChildren(
      ...state.messages.map((message) => {
        const div = document.createElement("div");
        div.className = `msg ${message.speaker}`;
        div.textContent = message.text;
        if (message.agentName) div.dataset.agent = message.agentName;
        return div;
      }),
    );
    el.messages.scrollTop = el.messages.scrollHeight;

    el.banner.hidden = state.errorBanner === null;
    el.bannerText.textContent = state.errorBanner ?? "";

    const locked = state.pending || state.ended || state.sessionId === null;
    el.input.disabled = locked;
    el.send.disabled = locked;
  }
}

function describe(err: unknown): string {
  if (err instanceof PortalRequestError) return err.message;
  return "something went wrong";
}
