// Console entry point: identity form, polling loop, initial render.

import { ApiClient } from "./api.js";
import { BrowserIdentityStorage, ConsoleStore } from "./state.js";
import { render } from "./view.js";

const POLL_INTERVAL_MS = 10_000;

function serviceBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "http://127.0.0.1:8321";
}

async function poll(store: ConsoleStore): Promise<void> {
  await store.flushQueue();
  try {
    await store.refresh();
  } catch {
    // service unreachable: keep the last known view, try again next tick
  }
  render(store);
}

function boot(): void {
  const store = new ConsoleStore(
    new ApiClient(serviceBase()),
    new BrowserIdentityStorage(),
  );
  const form = document.getElementById("identity-form") as HTMLFormElement | null;
  const input = document.getElementById("identity") as HTMLInputElement | null;
  if (form && input) {
    input.value = store.identity ?? "";
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      store.setIdentity(input.value);
      void poll(store);
    });
  }
  void poll(store);
  window.setInterval(() => void poll(store), POLL_INTERVAL_MS);
}

boot();
