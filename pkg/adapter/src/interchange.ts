/**
 * The embeddings interchange format shared with the clustering engine:
 * one utterance per line, `id<TAB>duration<TAB>speaker<TAB>v1,...,vD`,
 * UTF-8 with LF endings, `#` lines as comments. This file is the
 * contract boundary between the adapter and the engine.
 */

import { readFileSync } from "node:fs";

export interface EmbeddingRecord {
  id: string;
  durationSeconds: number | null;
  speaker: string | null;
  values: Float64Array;
}

export class InterchangeError extends Error {}

export function formatRecord(record: EmbeddingRecord): string {
  const duration = record.durationSeconds === null
      ? "" : String(record.durationSeconds);
  const speaker = record.speaker ?? "";
  const values = Array.from(record.values, (v) => String(v)).join(",");
  return `${record.id}\t${duration}\t${speaker}\t${values}`;
}

export function serialize(records: EmbeddingRecord[],
                          headerComments: string[] = []): string {
  const lines = headerComments.map((comment) => `# ${comment}`);
  for (const record of records) {
    lines.push(formatRecord(record));
  }
  return lines.map((line) => line + "\n").join("");
}

export function parseInterchange(path: string): EmbeddingRecord[] {
  const text = readFileSync(path, "utf-8");
  const records: EmbeddingRecord[] = [];
  let dimension = -1;
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].replace(/\r$/, "");
    if (!line || line.startsWith("#")) {
      continue;
    }
    const parts = line.split("\t");
    if (parts.length !== 4) {
      throw new InterchangeError(
          `row ${i + 1}: expected 4 tab-separated fields`);
    }
    const [id, durationText, speaker, valueText] = parts;
    const values = Float64Array.from(
        valueText.split(","), (v) => Number(v));
    if (values.some((v) => !Number.isFinite(v))) {
      throw new InterchangeError(`row ${i + 1}: non-finite value`);
    }
    if (dimension === -1) {
      dimension = values.length;
    } else if (values.length !== dimension) {
      throw new InterchangeError(
          `row ${i + 1}: dimension ${values.length} != ${dimension}`);
    }
    records.push({
      id,
      durationSeconds: durationText === "" ? null : Number(durationText),
      speaker: speaker === "" ? null : speaker,
      values,
    });
  }
  return records;
}

export function cosineSimilarity(a: Float64Array, b: Float64Array): number {
  if (a.length !== b.length) {
    throw new InterchangeError(
        `dimension mismatch: ${a.length} vs ${b.length}`);
  }
  let dot = 0;
  let normA = 0;
  let normB = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    normA += a[i] * a[i];
    normB += b[i] * b[i];
  }
  if (normA === 0 || normB === 0) {
    throw new InterchangeError("zero-norm vector");
  }
  return Math.min(1, Math.max(-1, dot / Math.sqrt(normA * normB)));
}
