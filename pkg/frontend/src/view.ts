// DOM rendering for the annotator console. All state lives in the
// ConsoleStore; this module only draws it and forwards clicks.

import type { ConsoleStore } from "./state.js";
import type { CardView } from "./types.js";

const STATUS_LABEL: Record<string, string> = {
  pending: "pending",
  resolved: "resolved",
  dropped_tie: "dropped (tie)",
  expired: "expired",
};

function cardElement(store: ConsoleStore, view: CardView): HTMLElement {
  const root = document.createElement("article");
  root.className = `card status-${view.status}`;

  const head = document.createElement("header");
  const badge = document.createElement("span");
  badge.className = "badge";
  badge.textContent = STATUS_LABEL[view.status] ?? view.status;
  const title = document.createElement("strong");
  title.textContent = view.point_id;
  head.append(title, badge);
  if (store.isQueued(view.point_id)) {
    const retry = document.createElement("span");
    retry.className = "retry";
    retry.textContent = "reaction queued, retrying...";
    head.append(retry);
  }
  root.append(head);

  const summary = document.createElement("p");
  summary.textContent = view.summary_text;
  root.append(summary);

  if (view.links.length > 0) {
    const nav = document.createElement("nav");
    for (const link of view.links) {
      const a = document.createElement("a");
      a.href = link.url;
      a.textContent = link.title;
      a.target = "_blank";
      nav.append(a);
    }
    root.append(nav);
  }

  const tally = document.createElement("p");
  tally.className = "tallies";
  const you = view.own_reaction ? ` | you: ${view.own_reaction === "up" ? "\u{1F44D}" : "\u{1F44E}"}` : "";
  const verdict = view.final_verdict ? ` | verdict: ${view.final_verdict}` : "";
  tally.textContent = `\u{1F44D} ${view.tallies.up}  \u{1F44E} ${view.tallies.down}${you}${verdict}`;
  root.append(tally);

  const actions = document.createElement("div");
  actions.className = "actions";
  const disabled = view.status !== "pending";
  for (const [label, reaction] of [
    ["\u{1F44D} normal", "up"],
    ["\u{1F44E} abnormal", "down"],
    ["retract", "retract"],
  ] as const) {
    const button = document.createElement("button");
    button.textContent = label;
    button.disabled = disabled;
    button.addEventListener("click", () => {
      void store.react(view.point_id, reaction).then(() => render(store));
    });
    actions.append(button);
  }
  root.append(actions);
  return root;
}

export function render(store: ConsoleStore): void {
  const list = document.getElementById("cards");
  const who = document.getElementById("who");
  const noticebar = document.getElementById("notices");
  if (!list || !who || !noticebar) return;
  who.textContent = store.identity
    ? `labeling as ${store.identity}`
    : "set your annotator name to react";
  list.replaceChildren(...store.listCards().map((c) => cardElement(store, c)));
  const notices = store.noticeLog();
  noticebar.textContent = notices.length ? (notices[notices.length - 1] as string) : "";
}
