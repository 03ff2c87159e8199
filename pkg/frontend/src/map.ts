import type { FeatureCollection, Placement, RearrangeSite, WhatIfSite } from "./types";
import { binThresholds, colorForWeight } from "./scale";

const SVG_NS = "http://www.w3.org/2000/svg";
export const MAP_W = 900;
export const MAP_H = 560;

export interface Projection {
  x(lon: number): number;
  y(lat: number): number;
  lon(x: number): number;
  lat(y: number): number;
}

/** Equirectangular fit of the dataset bounding box into the SVG canvas. */
export function makeProjection(collections: FeatureCollection[]): Projection {
  let minLon = -125, maxLon = -66, minLat = 24, maxLat = 50;
  const lons: number[] = [];
  const lats: number[] = [];
  for (const col of collections) {
    for (const f of col.features) {
      lons.push(f.geometry.coordinates[0]);
      lats.push(f.geometry.coordinates[1]);
    }
  }
  if (lons.length > 0) {
    minLon = Math.min(...lons);
    maxLon = Math.max(...lons);
    minLat = Math.min(...lats);
    maxLat = Math.max(...lats);
  }
  const padLon = Math.max(0.5, (maxLon - minLon) * 0.05);
  const padLat = Math.max(0.5, (maxLat - minLat) * 0.05);
  minLon -= padLon; maxLon += padLon; minLat -= padLat; maxLat += padLat;
  const sx = MAP_W / (maxLon - minLon);
  const sy = MAP_H / (maxLat - minLat);
  return {
    x: (lon) => (lon - minLon) * sx,
    y: (lat) => (maxLat - lat) * sy,
    lon: (x) => x / sx + minLon,
    lat: (y) => maxLat - y / sy,
  };
}

function el(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag) as SVGElement;
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export interface MapData {
  demand: FeatureCollection;
  facilities: FeatureCollection;
  pins: WhatIfSite[];
  newlyCovered: Set<string>;
  suggestions: Placement[];
  rearranged: RearrangeSite[];
  rearrangedPositions: Map<string, [number, number]>; // zcta -> lon, lat
}

export interface MapCallbacks {
  onDemandClick(zcta: string): void;
  onMapClick(lat: number, lon: number): void;
  onSuggestionClick(rank: number): void;
}

/**
 * Rebuild the map layers from scratch. Same data in, same DOM out; all
 * ordering is the server's.
 */
export function renderMap(
  svg: SVGSVGElement,
  proj: Projection,
  data: MapData,
  cb: MapCallbacks,
): void {
  svg.innerHTML = "";
  if (!svg.hasAttribute("viewBox")) {
    svg.setAttribute("viewBox", `0 0 ${MAP_W} ${MAP_H}`);
  }

  const weights = data.demand.features.map((f) => Number(f.properties.weight ?? 0));
  const thresholds = binThresholds(weights);

  const demandLayer = el("g", { class: "layer-demand" });
  for (const f of data.demand.features) {
    const [lon, lat] = f.geometry.coordinates;
    const zcta = String(f.properties.zcta ?? "");
    const weight = Number(f.properties.weight ?? 0);
    const covered = Boolean(f.properties.covered);
    const dot = el("circle", {
      cx: proj.x(lon),
      cy: proj.y(lat),
      r: 3,
      fill: colorForWeight(weight, thresholds),
      stroke: data.newlyCovered.has(zcta) ? "#15803d" : covered ? "none" : "#b91c1c",
      "stroke-width": data.newlyCovered.has(zcta) ? 2 : covered ? 0 : 1,
      "data-zcta": zcta,
      class: "demand-dot",
    });
    dot.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cb.onDemandClick(zcta);
    });
    demandLayer.appendChild(dot);
  }
  svg.appendChild(demandLayer);

  const rearrangedLayer = el("g", { class: "layer-rearranged" });
  for (const site of data.rearranged) {
    const pos = data.rearrangedPositions.get(site.zcta);
    if (!pos) continue;
    const [lon, lat] = pos;
    const x = proj.x(lon);
    const y = proj.y(lat);
    rearrangedLayer.appendChild(el("path", {
      d: `M ${x} ${y - 6} L ${x + 6} ${y} L ${x} ${y + 6} L ${x - 6} ${y} Z`,
      fill: "#eab308",
      stroke: "#854d0e",
      class: "rearranged-site",
      "data-zcta": site.zcta,
    }));
  }
  svg.appendChild(rearrangedLayer);

  const facilityLayer = el("g", { class: "layer-facilities" });
  for (const f of data.facilities.features) {
    const [lon, lat] = f.geometry.coordinates;
    facilityLayer.appendChild(el("circle", {
      cx: proj.x(lon),
      cy: proj.y(lat),
      r: 4,
      fill: "#dc2626",
      class: "facility-marker",
      "data-id": String(f.properties.id ?? ""),
    }));
  }
  svg.appendChild(facilityLayer);

  const suggestionLayer = el("g", { class: "layer-suggestions" });
  for (const s of data.suggestions) {
    const x = proj.x(s.lon);
    const y = proj.y(s.lat);
    const group = el("g", { class: "suggestion-marker", "data-rank": s.rank });
    group.appendChild(el("rect", {
      x: x - 5, y: y - 5, width: 10, height: 10,
      fill: "#f97316", stroke: "#7c2d12",
    }));
    const label = el("text", {
      x, y: y - 8, "text-anchor": "middle", "font-size": 10, fill: "#7c2d12",
    });
    label.textContent = String(s.rank);
    group.appendChild(label);
    group.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cb.onSuggestionClick(s.rank);
    });
    suggestionLayer.appendChild(group);
  }
  svg.appendChild(suggestionLayer);

  const pinLayer = el("g", { class: "layer-pins" });
  data.pins.forEach((pin, i) => {
    let lon: number, lat: number;
    if ("zcta" in pin) {
      const feat = data.demand.features.find((f) => f.properties.zcta === pin.zcta);
      if (!feat) return;
      [lon, lat] = feat.geometry.coordinates;
    } else {
      lon = pin.lon;
      lat = pin.lat;
    }
    const x = proj.x(lon);
    const y = proj.y(lat);
    pinLayer.appendChild(el("path", {
      d: `M ${x} ${y} l -5 -10 a 5 5 0 1 1 10 0 Z`,
      fill: "#7c3aed",
      stroke: "#4c1d95",
      class: "whatif-pin",
      "data-pin-index": i,
    }));
  });
  svg.appendChild(pinLayer);

  svg.onclick = (ev: MouseEvent) => {
    if (svg.dataset.suppressClick === "1") {
      delete svg.dataset.suppressClick;
      return;
    }
    const [x, y] = clientToSvg(svg, ev.clientX, ev.clientY);
    cb.onMapClick(proj.lat(y), proj.lon(x));
  };
}

export interface ViewBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function readViewBox(svg: SVGSVGElement): ViewBox {
  const raw = svg.getAttribute("viewBox") ?? `0 0 ${MAP_W} ${MAP_H}`;
  const [x, y, w, h] = raw.split(/\s+/).map(Number);
  return { x, y, w, h };
}

function writeViewBox(svg: SVGSVGElement, v: ViewBox): void {
  svg.setAttribute("viewBox", `${v.x} ${v.y} ${v.w} ${v.h}`);
}

/** Zoom by `factor` keeping the svg-space point (cx, cy) fixed. */
export function zoomViewBox(v: ViewBox, factor: number, cx: number, cy: number): ViewBox {
  const w = Math.min(MAP_W * 4, Math.max(MAP_W / 64, v.w * factor));
  const h = (w / v.w) * v.h;
  return {
    x: cx - ((cx - v.x) / v.w) * w,
    y: cy - ((cy - v.y) / v.h) * h,
    w,
    h,
  };
}

export function panViewBox(v: ViewBox, dx: number, dy: number): ViewBox {
  return { x: v.x - dx, y: v.y - dy, w: v.w, h: v.h };
}

function clientToSvg(svg: SVGSVGElement, clientX: number, clientY: number): [number, number] {
  const rect = svg.getBoundingClientRect();
  const view = readViewBox(svg);
  const scaleX = rect.width > 0 ? view.w / rect.width : 1;
  const scaleY = rect.height > 0 ? view.h / rect.height : 1;
  return [view.x + (clientX - rect.left) * scaleX, view.y + (clientY - rect.top) * scaleY];
}

/** Wheel zoom and drag pan; attach once, survives layer re-renders. */
export function setupMapInteractions(svg: SVGSVGElement): void {
  svg.addEventListener("wheel", (ev: WheelEvent) => {
    ev.preventDefault();
    const [cx, cy] = clientToSvg(svg, ev.clientX, ev.clientY);
    const factor = ev.deltaY > 0 ? 1.2 : 1 / 1.2;
    writeViewBox(svg, zoomViewBox(readViewBox(svg), factor, cx, cy));
  }, { passive: false });

  let dragFrom: [number, number] | null = null;
  let moved = false;
  svg.addEventListener("mousedown", (ev: MouseEvent) => {
    dragFrom = [ev.clientX, ev.clientY];
    moved = false;
  });
  svg.addEventListener("mousemove", (ev: MouseEvent) => {
    if (!dragFrom) return;
    const [px, py] = dragFrom;
    if (Math.abs(ev.clientX - px) + Math.abs(ev.clientY - py) < 3 && !moved) return;
    moved = true;
    const rect = svg.getBoundingClientRect();
    const view = readViewBox(svg);
    const scaleX = rect.width > 0 ? view.w / rect.width : 1;
    const scaleY = rect.height > 0 ? view.h / rect.height : 1;
    writeViewBox(svg, panViewBox(view, (ev.clientX - px) * scaleX, (ev.clientY - py) * scaleY));
    dragFrom = [ev.clientX, ev.clientY];
  });
  svg.addEventListener("mouseup", () => {
    if (moved) svg.dataset.suppressClick = "1";
    dragFrom = null;
    moved = false;
  });
}
