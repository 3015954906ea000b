// Scripted conversation against a live portal process: the badge must track
// handoff and handback, and the on-screen order must match the transcript.

import { spawn, ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, expect, it } from "vitest";

import { PortalClient } from "../src/api.js";
import { ChatController, mount } from "../src/ui.js";

let portal: ChildProcess;
let client: PortalClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForHealth(baseUrl: string): Promise<void> {
  const deadline = Date.now() + 20000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${baseUrl}/api/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("portal did not come up");
}

beforeAll(async () => {
  const port = await freePort();
  portal = spawn(
    "python3",
    ["-m", "parley.cli", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { stdio: "ignore" },
  );
  client = new PortalClient(`http://127.0.0.1:${port}`);
  await waitForHealth(client.baseUrl);
});

afterAll(() => {
  portal?.kill();
});

const SCRIPT: { send: string; agent: string }[] = [
  { send: "What is the weather in Pittsburgh?", agent: "porter" },
  { send: "tomorrow", agent: "porter" },
  { send: "Can you recommend a restaurant?", agent: "bistro" },
  { send: "thai food please", agent: "bistro" },
  { send: "cheap", agent: "porter" },
];

it("walks the scripted conversation with badge changes and ordered transcript", async () => {
  document.body.innerHTML = '<div id="app"></div>';
  const el = mount(document.getElementById("app") as HTMLElement);
  const controller = new ChatController(client, el);
  await controller.start();
  expect(el.badge.textContent).toBe("porter");

  const badges: string[] = [];
  for (const step of SCRIPT) {
    el.input.value = step.send;
    await controller.send();
    expect(controller.state.errorBanner).toBeNull();
    expect(el.badge.textContent).toBe(step.agent);
    badges.push(el.badge.textContent ?? "");
  }
  expect(badges).toEqual(["porter", "porter", "bistro", "bistro", "porter"]);

  const notices = Array.from(el.messages.querySelectorAll(".msg.notice")).map(
    (node) => node.textContent,
  );
  expect(notices).toEqual(["now speaking with bistro", "now speaking with porter"]);

  // on-screen order equals the server transcript
  const sessionId = controller.state.sessionId as string;
  const turns = await client.transcript(sessionId);
  expect(turns.length).toBe(SCRIPT.length + 1);

  const onScreen = Array.from(el.messages.children).filter(
    (node) => !node.classList.contains("notice"),
  );
  expect(onScreen.length).toBe(1 + 2 * SCRIPT.length);

  const greeting = turns[0];
  expect(greeting?.user_text).toBeNull();
  expect(onScreen[0]?.getAttribute("data-agent")).toBe(greeting?.agent);

  for (let i = 1; i < turns.length; i += 1) {
    const userBubble = onScreen[2 * i - 1];
    const replyBubble = onScreen[2 * i];
    expect(userBubble?.className).toBe("msg user");
    expect(userBubble?.textContent).toBe(turns[i]?.user_text);
    expect(replyBubble?.className).toBe("msg agent");
    expect(replyBubble?.getAttribute("data-agent")).toBe(turns[i]?.agent);
  }

  // the remote agent's report rode back on the handback turn
  const reports = turns.filter((turn) => turn.report !== null);
  expect(reports.length).toBe(1);
  expect(reports[0]?.report).toMatchObject({ outcome: "completed" });
});
