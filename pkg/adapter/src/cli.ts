#!/usr/bin/env node
/**
 * speakercluster-adapter CLI.
 *
 *   extract --manifest rows.tsv --out embeddings.tsv
 *           (--weights lstm.json | --stub) [--vad] [--rejects path]
 *   plot    --embeddings embeddings.tsv --out sims.svg [--bins 60]
 *
 * Exit codes: 0 success, 1 usage error, 2 data error.
 */

import { resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { EMBEDDING_DIMENSION, LstmSpeakerEncoder, StubEncoder,
         VoiceEncoder } from "./encoder.js";
import { extractEmbeddings } from "./extract.js";
import { MEL_CHANNELS } from "./mel.js";
import { plotSimilarityDistributions } from "./plot.js";

class UsageError extends Error {}

function parseFlags(argv: string[],
                    booleans: Set<string>): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new UsageError(`unexpected argument: ${arg}`);
    }
    const name = arg.slice(2);
    if (booleans.has(name)) {
      flags.set(name, "true");
    } else {
      const value = argv[++i];
      if (value === undefined) {
        throw new UsageError(`flag --${name} needs a value`);
      }
      flags.set(name, value);
    }
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new UsageError(`missing required flag --${name}`);
  }
  return value;
}

function runExtract(argv: string[]): number {
  const flags = parseFlags(argv, new Set(["vad", "stub"]));
  const manifest = required(flags, "manifest");
  const out = required(flags, "out");
  let encoder: VoiceEncoder;
  if (flags.has("weights")) {
    encoder = LstmSpeakerEncoder.fromFile(flags.get("weights")!);
  } else if (flags.has("stub")) {
    encoder = new StubEncoder(MEL_CHANNELS, EMBEDDING_DIMENSION);
    console.warn("using the deterministic stub encoder: output is "
        + "format-compatible but carries no learned speaker knowledge");
  } else {
    throw new UsageError(
        "pass --weights <exported-lstm.json> for the pretrained encoder, "
        + "or --stub for a deterministic test encoder");
  }
  const summary = extractEmbeddings(manifest, out, {
    encoder,
    vad: flags.has("vad"),
    rejectsPath: flags.get("rejects"),
  });
  console.error(`wrote ${summary.written} records to ${out}; `
      + `${summary.rejected} rejected (${summary.rejectsPath})`);
  return 0;
}

function runPlot(argv: string[]): number {
  const flags = parseFlags(argv, new Set());
  const embeddings = required(flags, "embeddings");
  const out = required(flags, "out");
  const bins = flags.has("bins") ? Number(flags.get("bins")) : 60;
  if (!Number.isInteger(bins) || bins < 2) {
    throw new UsageError("--bins must be an integer >= 2");
  }
  plotSimilarityDistributions(embeddings, out, bins);
  console.error(`wrote ${out}`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "extract") {
      return runExtract(rest);
    }
    if (command === "plot") {
      return runPlot(rest);
    }
    throw new UsageError("usage: speakercluster-adapter <extract|plot> ...");
  } catch (error) {
    if (error instanceof UsageError) {
      console.error(`error: ${error.message}`);
      return 1;
    }
    const message = error instanceof Error ? error.message : String(error);
    console.error(`error: ${message}`);
    return 2;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
    fileURLToPath(import.meta.url) === resolve(process.argv[1]);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
