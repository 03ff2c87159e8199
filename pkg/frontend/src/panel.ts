import type { CoverageSummary, Placement, WhatIfResponse } from "./types";
import type { SessionState } from "./state";
import { formatCount, formatMiles } from "./scale";

function div(className: string, text?: string): HTMLDivElement {
  const node = document.createElement("div");
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Covered/underserved totals plus a few quantile anchors. */
export function renderLegend(root: HTMLElement, summary: CoverageSummary): void {
  root.innerHTML = "";
  root.appendChild(div("legend-line covered-total",
    `Covered: ${formatCount(summary.covered)}`));
  root.appendChild(div("legend-line underserved-total",
    `Underserved: ${formatCount(summary.underserved)}`));
  root.appendChild(div("legend-line radius",
    `Service radius: ${summary.radius_miles} miles`));
  const anchors = summary.quantiles.filter((p) => [0.25, 0.5, 0.75].includes(p.q));
  for (const p of anchors) {
    root.appendChild(div("legend-line quantile",
      `${Math.round(p.q * 100)}% within ${formatMiles(p.miles)}`));
  }
  const key = div("legend-key");
  key.innerHTML =
    '<span class="key-existing">● existing</span>' +
    '<span class="key-added">■ suggested</span>' +
    '<span class="key-rearranged">◆ rearranged</span>' +
    '<span class="key-pin">⬤ your pin</span>';
  root.appendChild(key);
}

/** Joint what-if gain and the list of newly covered ZCTAs. */
export function renderGainPanel(root: HTMLElement, state: SessionState): void {
  root.innerHTML = "";
  if (state.pins.length === 0) {
    root.appendChild(div("gain-empty", "Click the map to place a candidate site."));
    return;
  }
  root.appendChild(div("pin-count", `${state.pins.length} site(s) placed`));
  if (state.unevaluated) {
    root.appendChild(div("gain-pending", "Evaluating..."));
    return;
  }
  const res: WhatIfResponse | null = state.lastWhatIf;
  if (res === null) {
    root.appendChild(div("gain-unevaluated", "Not evaluated (request failed)."));
    return;
  }
  root.appendChild(div("gain-value", `Gain: ${formatCount(res.gain)}`));
  const list = document.createElement("ul");
  list.className = "newly-covered";
  for (const z of res.newly_covered_zctas) {
    const li = document.createElement("li");
    li.textContent = z;
    list.appendChild(li);
  }
  root.appendChild(list);
}

/** Ordered greedy placements; clicking one adopts it as a what-if pin. */
export function renderSuggestions(
  root: HTMLElement,
  suggestions: Placement[] | null,
  onAdopt: (rank: number) => void,
): void {
  root.innerHTML = "";
  if (suggestions === null) return;
  const list = document.createElement("ol");
  list.className = "suggestion-list";
  for (const s of suggestions) {
    const li = document.createElement("li");
    li.className = "suggestion-row";
    li.dataset.rank = String(s.rank);
    li.textContent = `${s.zcta} +${formatCount(s.marginal_gain)}`;
    li.addEventListener("click", () => onAdopt(s.rank));
    list.appendChild(li);
  }
  root.appendChild(list);
}

export function renderBanner(root: HTMLElement, message: string | null): void {
  root.textContent = message ?? "";
  root.style.display = message ? "block" : "none";
}
