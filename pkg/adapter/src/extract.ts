/**
 * extract_embeddings: manifest of audio files in, interchange file out.
 * One record per manifest row (or per VAD segment when enabled);
 * undecodable rows are skipped with a warning and listed in a rejects
 * file. Preprocessing choices are recorded as header comments.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { VoiceEncoder } from "./encoder.js";
import { EmbeddingRecord, serialize } from "./interchange.js";
import { HOP_MS, MEL_CHANNELS, SAMPLE_RATE, WINDOW_MS,
         logMelSpectrogram } from "./mel.js";
import { ManifestRow, parseManifest } from "./manifest.js";
import { segmentBySpeechEnergy } from "./vad.js";
import { decodeWav, resample } from "./wav.js";

export interface ExtractOptions {
  encoder: VoiceEncoder;
  /** split recordings at speech-energy gaps before encoding */
  vad?: boolean;
  /** defaults to `${outPath}.rejects.tsv` */
  rejectsPath?: string;
  warn?: (message: string) => void;
}

export interface ExtractSummary {
  written: number;
  rejected: number;
  rejectsPath: string;
}

export function extractEmbeddings(manifestPath: string, outPath: string,
                                  options: ExtractOptions): ExtractSummary {
  const warn = options.warn ?? ((message) => console.warn(message));
  const rejectsPath = options.rejectsPath ?? `${outPath}.rejects.tsv`;
  const rows = parseManifest(manifestPath);

  const records: EmbeddingRecord[] = [];
  const rejects: Array<{ row: ManifestRow; reason: string }> = [];
  for (const row of rows) {
    try {
      records.push(...encodeRow(row, options));
    } catch (error) {
      const reason = error instanceof Error ? error.message : String(error);
      warn(`skipping ${row.id} (${row.path}): ${reason}`);
      rejects.push({ row, reason });
    }
  }

  const comments = [
    `encoder=${options.encoder.name} dimension=${options.encoder.dimension}`,
    `resample_hz=${SAMPLE_RATE} mono=mean-of-channels`,
    `mel_channels=${MEL_CHANNELS} window_ms=${WINDOW_MS} hop_ms=${HOP_MS}`,
    `vad=${options.vad ? "energy-gap" : "off"}`,
  ];
  writeFileSync(outPath, serialize(records, comments), "utf-8");

  const rejectLines = ["id\tpath\treason"];
  for (const { row, reason } of rejects) {
    rejectLines.push(`${row.id}\t${row.path}\t${reason.replace(/\t/g, " ")}`);
  }
  writeFileSync(rejectsPath, rejectLines.map((l) => l + "\n").join(""),
                "utf-8");

  return {
    written: records.length,
    rejected: rejects.length,
    rejectsPath,
  };
}

function encodeRow(row: ManifestRow,
                   options: ExtractOptions): EmbeddingRecord[] {
  const decoded = decodeWav(readFileSync(row.path));
  const samples = resample(decoded.samples, decoded.sampleRate, SAMPLE_RATE);
  const segments = options.vad
      ? segmentBySpeechEnergy(samples)
      : [{ start: 0, end: samples.length }];

  const records: EmbeddingRecord[] = [];
  segments.forEach((segment, index) => {
    const piece = samples.subarray(segment.start, segment.end);
    const frames = logMelSpectrogram(piece);
    const values = options.encoder.encode(frames);
    records.push({
      id: segments.length === 1 ? row.id : `${row.id}#${index}`,
      durationSeconds: segments.length === 1
          ? decoded.durationSeconds
          : (segment.end - segment.start) / SAMPLE_RATE,
      speaker: row.speaker,
      values,
    });
  });
  return records;
}
