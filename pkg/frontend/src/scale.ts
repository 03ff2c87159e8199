// Presentation-only demand binning: weights are grouped by quantile so the
// choropleth has a readable spread regardless of the dataset. No coverage
// arithmetic happens here.

export const BIN_COLORS = ["#dbe9f6", "#a6c8e4", "#6da3cf", "#3f7cb8", "#1b4f8c"];

export function binThresholds(weights: number[], bins: number = BIN_COLORS.length): number[] {
  const sorted = [...weights].sort((a, b) => a - b);
  if (sorted.length === 0) return [];
  const cuts: number[] = [];
  for (let i = 1; i < bins; i++) {
    const idx = Math.min(sorted.length - 1, Math.floor((i / bins) * sorted.length));
    cuts.push(sorted[idx]);
  }
  return cuts;
}

export function binIndex(weight: number, thresholds: number[]): number {
  let i = 0;
  while (i < thresholds.length && weight >= thresholds[i]) i++;
  return i;
}

export function colorForWeight(weight: number, thresholds: number[]): string {
  return BIN_COLORS[binIndex(weight, thresholds)];
}

export function formatCount(n: number): string {
  return n.toLocaleString("en-US");
}

export function formatMiles(m: number): string {
  return `${m.toFixed(1)} mi`;
}
