import { Client } from "./api";
import { Controller, bannerText } from "./controller";
import { MapData, makeProjection, renderMap, setupMapInteractions } from "./map";
import { renderBanner, renderGainPanel, renderLegend, renderSuggestions } from "./panel";
import { Store } from "./state";
import type { CoverageSummary, GeoPayload } from "./types";

const BASE_URL = (import.meta as any).env?.VITE_API_BASE ?? "http://127.0.0.1:8787";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export async function boot(root: Document = document): Promise<void> {
  const client = new Client(BASE_URL);
  const store = new Store();
  const controller = new Controller(client, store);

  const svg = byId<HTMLElement>("map") as unknown as SVGSVGElement;
  const legend = byId<HTMLDivElement>("legend");
  const gains = byId<HTMLDivElement>("gain-panel");
  const suggestionsBox = byId<HTMLDivElement>("suggestions");
  const banner = byId<HTMLDivElement>("banner");

  let summary: CoverageSummary;
  let geo: GeoPayload;
  try {
    [summary, geo] = await Promise.all([client.coverage(), client.geo()]);
  } catch (e) {
    renderBanner(banner, bannerText(e));
    return; // offline: no stale data rendered
  }
  const proj = makeProjection([geo.demand, geo.facilities]);
  const centroidOf = new Map<string, [number, number]>();
  for (const f of geo.demand.features) {
    centroidOf.set(String(f.properties.zcta), f.geometry.coordinates);
  }

  renderLegend(legend, summary);
  setupMapInteractions(svg);

  const draw = () => {
    const state = store.get();
    const data: MapData = {
      demand: geo.demand,
      facilities: geo.facilities,
      pins: state.pins,
      newlyCovered: new Set(state.lastWhatIf?.newly_covered_zctas ?? []),
      suggestions: state.suggestions ?? [],
      rearranged: state.rearrangePlan?.sites ?? [],
      rearrangedPositions: centroidOf,
    };
    renderMap(svg, proj, data, {
      onDemandClick: (zcta) => void controller.placePin({ zcta }),
      onMapClick: (lat, lon) => void controller.placePin({ lat, lon }),
      onSuggestionClick: (rank) => void controller.adoptSuggestion(rank),
    });
    renderGainPanel(gains, state);
    renderSuggestions(suggestionsBox, state.suggestions,
      (rank) => void controller.adoptSuggestion(rank));
    renderBanner(banner, state.banner);
  };
  store.subscribe(draw);
  draw();

  byId<HTMLButtonElement>("run-suggestions").addEventListener("click", () => {
    const k = Number(byId<HTMLInputElement>("k-input").value) || 5;
    const scope = byId<HTMLInputElement>("scope-input").value.trim() || "nation";
    void controller.runSuggestions(k, scope);
  });
  byId<HTMLButtonElement>("run-rearrange").addEventListener("click", () => {
    void controller.runRearrange(0, 5000, 200);
  });
  byId<HTMLButtonElement>("clear-session").addEventListener("click", () => {
    controller.clear();
  });
}

const MODE = (import.meta as any).env?.MODE;
if (MODE !== "test" && typeof document !== "undefined" && document.getElementById("map")) {
  void boot();
}
