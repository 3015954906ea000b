// Entry point: mount into #app and start a session against the portal.
// Base URL resolution: window.PORTAL_BASE, then <meta name="portal-base">,
// then same origin.

import { PortalClient } from "./api.js";
import { ChatController, mount } from "./ui.js";

declare global {
  interface Window {
    PORTAL_BASE?: string;
  }
}

function portalBase(): string {
  if (typeof window.PORTAL_BASE === "string") return window.PORTAL_BASE;
  const meta = document.querySelector<HTMLMetaElement>('meta[name="portal-base"]');
  return meta?.content ?? "";
}

const app = document.getElementById("app");
if (!app) throw new Error("missing #app container");
const controller = new ChatController(new PortalClient(portalBase()), mount(app));
void controller.start();
