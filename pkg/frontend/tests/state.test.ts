import { describe, expect, it } from "vitest";

import { MAX_PINS, Store, addPin, clearSession, initialState } from "../src/state";
import { binIndex, binThresholds, colorForWeight, BIN_COLORS } from "../src/scale";

describe("session state", () => {
  it("addPin appends and marks the session unevaluated", () => {
    const state = initialState();
    const patch = addPin(state, { zcta: "00002" });
    expect(patch.pins).toEqual([{ zcta: "00002" }]);
    expect(patch.unevaluated).toBe(true);
  });

  it("addPin refuses more than the request limit", () => {
    const state = initialState();
    state.pins = Array.from({ length: MAX_PINS }, (_, i) => ({ zcta: String(i) }));
    const patch = addPin(state, { zcta: "too-many" });
    expect(patch.pins).toBeUndefined();
    expect(patch.banner).toContain("50");
  });

  it("clearSession restores the baseline view but keeps scope settings", () => {
    const store = new Store();
    store.update({ pins: [{ zcta: "1" }], scope: "CA", k: 3, banner: "x" });
    store.update(clearSession());
    const s = store.get();
    expect(s.pins).toEqual([]);
    expect(s.lastWhatIf).toBeNull();
    expect(s.suggestions).toBeNull();
    expect(s.banner).toBeNull();
    expect(s.scope).toBe("CA");
    expect(s.k).toBe(3);
  });

  it("store notifies subscribers on update", () => {
    const store = new Store();
    const seen: number[] = [];
    const off = store.subscribe((s) => seen.push(s.pins.length));
    store.update({ pins: [{ zcta: "a" }] });
    off();
    store.update({ pins: [] });
    expect(seen).toEqual([1]);
  });
});

describe("choropleth binning", () => {
  it("splits weights into quantile bins", () => {
    const weights = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
    const cuts = binThresholds(weights, 5);
    expect(cuts).toHaveLength(4);
    expect(binIndex(1, cuts)).toBe(0);
    expect(binIndex(10, cuts)).toBe(4);
    const colors = weights.map((w) => colorForWeight(w, cuts));
    expect(new Set(colors).size).toBe(5);
    expect(colors[0]).toBe(BIN_COLORS[0]);
    expect(colors[9]).toBe(BIN_COLORS[4]);
  });

  it("handles empty and constant inputs", () => {
    expect(binThresholds([], 5)).toEqual([]);
    const cuts = binThresholds([7, 7, 7], 5);
    expect(binIndex(7, cuts)).toBe(cuts.length);
  });
});
