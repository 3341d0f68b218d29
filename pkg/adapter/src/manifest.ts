/**
 * Audio manifest: tab-separated rows of (utterance id, audio path,
 * optional speaker label). `#` lines are comments.
 */

import { existsSync, readFileSync } from "node:fs";

export interface ManifestRow {
  id: string;
  path: string;
  speaker: string | null;
}

export class ManifestError extends Error {}

export function parseManifest(path: string): ManifestRow[] {
  const text = readFileSync(path, "utf-8");
  const rows: ManifestRow[] = [];
  const seen = new Set<string>();
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].replace(/\r$/, "");
    if (!line || line.startsWith("#")) {
      continue;
    }
    const parts = line.split("\t");
    if (parts.length < 2 || parts.length > 3) {
      throw new ManifestError(
          `row ${i + 1}: expected "id<TAB>path[<TAB>speaker]", ` +
          `got ${parts.length} fields`);
    }
    const [id, audioPath] = parts;
    const speaker = parts.length === 3 && parts[2] !== "" ? parts[2] : null;
    if (!id) {
      throw new ManifestError(`row ${i + 1}: empty id`);
    }
    if (seen.has(id)) {
      throw new ManifestError(`row ${i + 1}: duplicate id ${id}`);
    }
    if (!existsSync(audioPath)) {
      throw new ManifestError(
          `row ${i + 1}: audio file does not exist: ${audioPath}`);
    }
    seen.add(id);
    rows.push({ id, path: audioPath, speaker });
  }
  if (rows.length === 0 && !text.includes("\t")) {
    // an entirely empty manifest is legal: it produces a header-only file
    return [];
  }
  return rows;
}
