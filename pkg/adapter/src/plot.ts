/**
 * Same- vs different-speaker cosine similarity distributions, rendered
 * as overlaid density curves in a standalone SVG.
 */

import { writeFileSync } from "node:fs";

import { cosineSimilarity, parseInterchange } from "./interchange.js";

export class PlotError extends Error {}

export interface SimilaritySplit {
  same: number[];
  different: number[];
}

export function splitSimilarities(path: string): SimilaritySplit {
  const records = parseInterchange(path);
  if (records.some((r) => r.speaker === null)) {
    throw new PlotError("similarity plot needs a speaker label on every "
        + "utterance");
  }
  const speakers = new Set(records.map((r) => r.speaker));
  if (speakers.size < 2) {
    throw new PlotError("similarity plot needs at least 2 speakers");
  }
  const same: number[] = [];
  const different: number[] = [];
  for (let i = 0; i < records.length; i++) {
    for (let j = i + 1; j < records.length; j++) {
      const sim = cosineSimilarity(records[i].values, records[j].values);
      (records[i].speaker === records[j].speaker ? same : different)
          .push(sim);
    }
  }
  if (same.length === 0 || different.length === 0) {
    throw new PlotError("need at least one same-speaker and one "
        + "different-speaker pair");
  }
  return { same, different };
}

function histogram(values: number[], bins: number): Float64Array {
  const counts = new Float64Array(bins);
  for (const v of values) {
    const bin = Math.min(bins - 1,
        Math.max(0, Math.floor(((v + 1) / 2) * bins)));
    counts[bin] += 1;
  }
  const peak = Math.max(...counts, 1);
  for (let i = 0; i < bins; i++) {
    counts[i] /= peak;
  }
  return counts;
}

function densityPath(density: Float64Array, width: number, height: number,
                     margin: number): string {
  const innerWidth = width - 2 * margin;
  const innerHeight = height - 2 * margin;
  const points: string[] = [
    `${margin},${height - margin}`,
  ];
  for (let i = 0; i < density.length; i++) {
    const x = margin + ((i + 0.5) / density.length) * innerWidth;
    const y = height - margin - density[i] * innerHeight;
    points.push(`${x.toFixed(1)},${y.toFixed(1)}`);
  }
  points.push(`${width - margin},${height - margin}`);
  return points.join(" ");
}

export function renderSimilaritySvg(split: SimilaritySplit,
                                    bins = 60): string {
  const width = 640;
  const height = 360;
  const margin = 40;
  const sameDensity = histogram(split.same, bins);
  const diffDensity = histogram(split.different, bins);
  const ticks = [-1, -0.5, 0, 0.5, 1].map((t) => {
    const x = margin + ((t + 1) / 2) * (width - 2 * margin);
    return `<line x1="${x}" y1="${height - margin}" x2="${x}" ` +
        `y2="${height - margin + 5}" stroke="#333"/>` +
        `<text x="${x}" y="${height - margin + 18}" font-size="11" ` +
        `text-anchor="middle" fill="#333">${t}</text>`;
  }).join("");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}">
<rect width="${width}" height="${height}" fill="white"/>
<polygon points="${densityPath(diffDensity, width, height, margin)}" ` +
      `fill="#d62728" fill-opacity="0.45" stroke="#d62728"/>
<polygon points="${densityPath(sameDensity, width, height, margin)}" ` +
      `fill="#1f77b4" fill-opacity="0.45" stroke="#1f77b4"/>
<line x1="${margin}" y1="${height - margin}" x2="${width - margin}" ` +
      `y2="${height - margin}" stroke="#333"/>
${ticks}
<text x="${width / 2}" y="${height - 6}" font-size="12" ` +
      `text-anchor="middle" fill="#333">cosine similarity</text>
<rect x="${width - 210}" y="${margin - 20}" width="12" height="12" ` +
      `fill="#1f77b4" fill-opacity="0.45"/>
<text x="${width - 192}" y="${margin - 9}" font-size="12" ` +
      `fill="#333">same speaker (${split.same.length} pairs)</text>
<rect x="${width - 210}" y="${margin}" width="12" height="12" ` +
      `fill="#d62728" fill-opacity="0.45"/>
<text x="${width - 192}" y="${margin + 11}" font-size="12" ` +
      `fill="#333">different speaker (${split.different.length} pairs)</text>
</svg>
`;
}

export function plotSimilarityDistributions(embeddingsPath: string,
                                            outImage: string,
                                            bins = 60): void {
  const split = splitSimilarities(embeddingsPath);
  writeFileSync(outImage, renderSimilaritySvg(split, bins), "utf-8");
}
