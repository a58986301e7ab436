// Console state: the annotator identity, the card list, optimistic
// reaction handling with server reconciliation, and a retry queue for
// reactions that could not reach the service.
//
// The store never invents state: a card view always comes from a service
// response, except for the short-lived optimistic overlay a reaction
// applies, which is replaced by the server's authoritative view (or
// queued with a visible retry indicator when the service is down).

import { ApiClient, NetworkError, UnknownCandidateError } from "./api.js";
import type { CardView, Reaction, Tallies } from "./types.js";

export interface IdentityStorage {
  get(): string | null;
  set(name: string): void;
}

export class MemoryIdentityStorage implements IdentityStorage {
  private name: string | null = null;
  get(): string | null {
    return this.name;
  }
  set(name: string): void {
    this.name = name;
  }
}

export class BrowserIdentityStorage implements IdentityStorage {
  private static readonly KEY = "driftwatch.annotator";
  get(): string | null {
    return window.localStorage.getItem(BrowserIdentityStorage.KEY);
  }
  set(name: string): void {
    window.localStorage.setItem(BrowserIdentityStorage.KEY, name);
  }
}

export interface QueuedReaction {
  reaction: Reaction | "retract";
  attempts: number;
}

function adjustedTallies(
  tallies: Tallies,
  previous: Reaction | null,
  next: Reaction | "retract",
): Tallies {
  const out = { ...tallies };
  if (previous) out[previous] -= 1;
  if (next !== "retract") out[next] += 1;
  return out;
}

export class ConsoleStore {
  private cards = new Map<string, CardView>();
  private queued = new Map<string, QueuedReaction>();
  private optimistic = new Set<string>();
  private notices: string[] = [];
  identity: string | null;

  constructor(
    private readonly api: ApiClient,
    private readonly storage: IdentityStorage = new MemoryIdentityStorage(),
  ) {
    this.identity = storage.get();
  }

  setIdentity(name: string): void {
    const trimmed = name.trim();
    if (!trimmed) {
      throw new Error("annotator name must not be empty");
    }
    this.storage.set(trimmed);
    this.identity = trimmed;
  }

  card(pointId: string): CardView | undefined {
    return this.cards.get(pointId);
  }

  /** Cards in stable display order, pending first then terminal. */
  listCards(): CardView[] {
    const order = (c: CardView) => (c.status === "pending" ? 0 : 1);
    return [...this.cards.values()].sort(
      (a, b) =>
        order(a) - order(b) ||
        a.created_at - b.created_at ||
        a.point_id.localeCompare(b.point_id),
    );
  }

  isQueued(pointId: string): boolean {
    return this.queued.has(pointId);
  }

  queuedCount(): number {
    return this.queued.size;
  }

  noticeLog(): readonly string[] {
    return this.notices;
  }

  private notice(text: string): void {
    this.notices.push(text);
  }

  private adopt(view: CardView): void {
    this.cards.set(view.point_id, view);
    this.optimistic.delete(view.point_id);
  }

  /** Pull the full pending queue (all pages); cards that vanished from
   * the pending list are re-fetched individually so their terminal
   * status still shows. Cards with an in-flight queued reaction keep
   * their optimistic view until the retry settles. */
  async refresh(): Promise<void> {
    const seen = new Set<string>();
    let offset = 0;
    for (;;) {
      const page = await this.api.listPending(this.identity, 50, offset);
      for (const view of page.cards) {
        seen.add(view.point_id);
        if (!this.queued.has(view.point_id)) {
          this.adopt(view);
        }
      }
      offset += page.cards.length;
      if (offset >= page.total || page.cards.length === 0) {
        break;
      }
    }
    for (const [pointId, known] of [...this.cards]) {
      if (seen.has(pointId) || known.status !== "pending") {
        continue;
      }
      if (this.queued.has(pointId)) {
        continue;
      }
      try {
        this.adopt(await this.api.getCard(pointId, this.identity));
      } catch (error) {
        if (error instanceof NetworkError) {
          return; // keep the stale view; next poll will retry
        }
        this.cards.delete(pointId);
        this.notice(`card ${pointId} is gone from the service`);
      }
    }
  }

  /** Submit (or switch, or retract) this annotator's reaction. The local
   * view updates optimistically and is reconciled with the server's
   * card; a network failure queues the reaction with a visible retry
   * indicator. */
  async react(pointId: string, reaction: Reaction | "retract"): Promise<void> {
    if (!this.identity) {
      throw new Error("set an annotator identity before reacting");
    }
    const card = this.cards.get(pointId);
    if (card && card.status === "pending") {
      this.cards.set(pointId, {
        ...card,
        tallies: adjustedTallies(card.tallies, card.own_reaction, reaction),
        own_reaction: reaction === "retract" ? null : reaction,
      });
      this.optimistic.add(pointId);
    }
    await this.send(pointId, reaction);
  }

  private async send(pointId: string, reaction: Reaction | "retract"): Promise<void> {
    try {
      const view = await this.api.react(pointId, this.identity as string, reaction);
      this.queued.delete(pointId);
      this.adopt(view);
    } catch (error) {
      if (error instanceof NetworkError) {
        const previous = this.queued.get(pointId);
        this.queued.set(pointId, {
          reaction, // latest intent wins, mirroring server-side dedup
          attempts: (previous?.attempts ?? 0) + 1,
        });
        return;
      }
      if (error instanceof UnknownCandidateError) {
        this.cards.delete(pointId);
        this.queued.delete(pointId);
        this.optimistic.delete(pointId);
        this.notice(`card ${pointId} is unknown to the service; removed`);
        return;
      }
      throw error;
    }
  }

  /** Retry queued reactions; called from the polling loop. */
  async flushQueue(): Promise<void> {
    for (const [pointId, entry] of [...this.queued]) {
      await this.send(pointId, entry.reaction);
    }
  }
}
