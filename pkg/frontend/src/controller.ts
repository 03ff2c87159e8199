import { ApiError, Client } from "./api";
import { MAX_PINS, Store, addPin, clearSession } from "./state";
import type { WhatIfSite } from "./types";

/**
 * Session behavior: what-if requests are serialized (one in flight; pin
 * changes made meanwhile trigger exactly one re-evaluation), and at most
 * one optimizer request runs at a time. Every displayed number comes from
 * a server response.
 */
export class Controller {
  private whatifInFlight = false;
  private whatifDirty = false;

  constructor(
    readonly client: Client,
    readonly store: Store,
  ) {}

  async placePin(site: WhatIfSite): Promise<void> {
    const state = this.store.get();
    if (state.pins.length >= MAX_PINS) {
      this.store.update({ banner: `at most ${MAX_PINS} sites per session` });
      return;
    }
    this.store.update(addPin(state, site));
    await this.evaluate();
  }

  /** POST all placed sites; queue a single re-run if pins changed meanwhile. */
  async evaluate(): Promise<void> {
    if (this.whatifInFlight) {
      this.whatifDirty = true;
      return;
    }
    this.whatifInFlight = true;
    try {
      const pins = this.store.get().pins;
      if (pins.length === 0) {
        this.store.update({ lastWhatIf: null, unevaluated: false });
        return;
      }
      const res = await this.client.whatif(pins);
      this.store.update({ lastWhatIf: res, unevaluated: false, banner: null });
    } catch (e) {
      // Pins stay marked unevaluated; no stale gain is shown.
      this.store.update({ lastWhatIf: null, banner: bannerText(e) });
    } finally {
      this.whatifInFlight = false;
      if (this.whatifDirty) {
        this.whatifDirty = false;
        await this.evaluate();
      }
    }
  }

  async runSuggestions(k: number, scope: string): Promise<void> {
    if (this.store.get().optimizerBusy) return;
    this.store.update({ optimizerBusy: true, k, scope });
    try {
      const res = await this.client.greedy(k, scope);
      this.store.update({ suggestions: res.placements, banner: null });
    } catch (e) {
      this.store.update({ banner: bannerText(e) });
    } finally {
      this.store.update({ optimizerBusy: false });
    }
  }

  async runRearrange(seed: number, samples: number, patience: number): Promise<void> {
    if (this.store.get().optimizerBusy) return;
    this.store.update({ optimizerBusy: true });
    try {
      const res = await this.client.rearrange(seed, samples, patience);
      this.store.update({ rearrangePlan: res, banner: null });
    } catch (e) {
      this.store.update({ banner: bannerText(e) });
    } finally {
      this.store.update({ optimizerBusy: false });
    }
  }

  /** Adopt a greedy suggestion as a regular what-if pin. */
  async adoptSuggestion(rank: number): Promise<void> {
    const suggestions = this.store.get().suggestions ?? [];
    const hit = suggestions.find((s) => s.rank === rank);
    if (!hit) return;
    await this.placePin({ zcta: hit.zcta });
  }

  clear(): void {
    this.whatifDirty = false;
    this.store.update(clearSession());
  }
}

/** Error text for the banner; HTTP errors are surfaced verbatim. */
export function bannerText(e: unknown): string {
  if (e instanceof ApiError) return `server error ${e.status}: ${e.detail}`;
  if (e instanceof Error) return `server unreachable: ${e.message}`;
  return "server unreachable";
}
