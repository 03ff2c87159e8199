import type { Placement, RearrangeResponse, WhatIfResponse, WhatIfSite } from "./types";

export const MAX_PINS = 50;

/**
 * Client-side session: the user's placed pins and the overlays derived from
 * the last server answers. Clearing it restores the baseline view; nothing
 * here is persisted server-side.
 */
export interface SessionState {
  pins: WhatIfSite[];
  lastWhatIf: WhatIfResponse | null;
  /** true while pins have changed but no fresh evaluation has landed */
  unevaluated: boolean;
  suggestions: Placement[] | null;
  rearrangePlan: RearrangeResponse | null;
  optimizerBusy: boolean;
  scope: string;
  k: number;
  banner: string | null;
}

export function initialState(): SessionState {
  return {
    pins: [],
    lastWhatIf: null,
    unevaluated: false,
    suggestions: null,
    rearrangePlan: null,
    optimizerBusy: false,
    scope: "nation",
    k: 5,
    banner: null,
  };
}

type Listener = (state: SessionState) => void;

/** Minimal observable store; every mutation goes through update(). */
export class Store {
  private state: SessionState = initialState();
  private listeners: Listener[] = [];

  get(): SessionState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }
}

export function addPin(state: SessionState, site: WhatIfSite): Partial<SessionState> {
  if (state.pins.length >= MAX_PINS) {
    return { banner: `at most ${MAX_PINS} sites per session` };
  }
  return { pins: [...state.pins, site], unevaluated: true, banner: null };
}

export function clearSession(): Partial<SessionState> {
  const fresh = initialState();
  return {
    pins: fresh.pins,
    lastWhatIf: fresh.lastWhatIf,
    unevaluated: fresh.unevaluated,
    suggestions: fresh.suggestions,
    rearrangePlan: fresh.rearrangePlan,
    banner: fresh.banner,
  };
}

export function sameSite(a: WhatIfSite, b: WhatIfSite): boolean {
  if ("zcta" in a && "zcta" in b) return a.zcta === b.zcta;
  if ("lat" in a && "lat" in b) return a.lat === b.lat && a.lon === b.lon;
  return false;
}
