// Shapes of the planning service's JSON responses.

export interface QuantilePoint {
  q: number;
  miles: number;
}

export interface CoverageSummary {
  covered: number;
  underserved: number;
  total: number;
  radius_miles: number;
  quantiles: QuantilePoint[];
}

export interface PointFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] }; // lon, lat
  properties: Record<string, unknown>;
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: PointFeature[];
}

export interface GeoPayload {
  facilities: FeatureCollection;
  demand: FeatureCollection;
}

/** A candidate site: either a map coordinate or a demand centroid. */
export type WhatIfSite = { lat: number; lon: number } | { zcta: string };

export interface WhatIfResponse {
  gain: number;
  newly_covered_zctas: string[];
}

export interface Placement {
  rank: number;
  zcta: string;
  lat: number;
  lon: number;
  marginal_gain: number;
}

export interface GreedyResponse {
  placements: Placement[];
}

export interface RearrangeSite {
  zcta: string;
  load: number;
}

export interface RearrangeResponse {
  sites: RearrangeSite[];
  covered_before: number;
  covered_after: number;
  gain: number;
}
