/**
 * Voice encoders: log-mel frames in, one L2-normalized embedding out.
 *
 * LstmSpeakerEncoder runs inference for the usual speaker-verification
 * architecture (stacked LSTM over mel frames, linear projection of the
 * last hidden state, ReLU, L2 normalization) with weights exported to a
 * JSON file. StubEncoder is a deterministic stand-in for tests and
 * pipeline dry runs where no pretrained weights are available: it
 * projects mel summary statistics through a fixed random matrix, which
 * keeps the output unit-norm, content-determined and format-compatible,
 * but carries no learned speaker knowledge.
 */

import { readFileSync } from "node:fs";

export const EMBEDDING_DIMENSION = 256;

export interface VoiceEncoder {
  readonly dimension: number;
  readonly name: string;
  /** mel frames (one Float32Array of channels per frame) -> unit vector */
  encode(frames: Float32Array[]): Float64Array;
}

function l2Normalize(v: Float64Array): Float64Array {
  let norm = 0;
  for (let i = 0; i < v.length; i++) {
    norm += v[i] * v[i];
  }
  norm = Math.sqrt(norm);
  if (norm === 0) {
    throw new Error("encoder produced a zero embedding");
  }
  for (let i = 0; i < v.length; i++) {
    v[i] /= norm;
  }
  return v;
}

interface LstmLayerWeights {
  /** input weights, row-major (4*hidden x inputSize), gate order i,f,g,o */
  wIn: number[];
  /** recurrent weights, row-major (4*hidden x hidden) */
  wRec: number[];
  /** bias (4*hidden) */
  bias: number[];
}

export interface EncoderWeights {
  melChannels: number;
  hiddenSize: number;
  dimension: number;
  layers: LstmLayerWeights[];
  projection: { w: number[]; bias: number[] };
}

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

export class LstmSpeakerEncoder implements VoiceEncoder {
  readonly dimension: number;
  readonly name: string;
  private readonly weights: EncoderWeights;

  constructor(weights: EncoderWeights, name = "lstm-encoder") {
    validateWeights(weights);
    this.weights = weights;
    this.dimension = weights.dimension;
    this.name = name;
  }

  static fromFile(path: string): LstmSpeakerEncoder {
    const weights = JSON.parse(readFileSync(path, "utf-8"));
    return new LstmSpeakerEncoder(weights, `lstm-encoder(${path})`);
  }

  encode(frames: Float32Array[]): Float64Array {
    if (frames.length === 0) {
      throw new Error("cannot encode zero mel frames");
    }
    const { hiddenSize, layers, projection, dimension } = this.weights;
    let sequence: Float64Array[] = frames.map(
      (f) => Float64Array.from(f));
    for (const layer of layers) {
      sequence = runLstmLayer(sequence, layer, hiddenSize);
    }
    const last = sequence[sequence.length - 1];
    const out = new Float64Array(dimension);
    for (let d = 0; d < dimension; d++) {
      let acc = projection.bias[d];
      const rowStart = d * hiddenSize;
      for (let h = 0; h < hiddenSize; h++) {
        acc += projection.w[rowStart + h] * last[h];
      }
      out[d] = Math.max(acc, 0); // ReLU
    }
    return l2Normalize(out);
  }
}

function runLstmLayer(sequence: Float64Array[], layer: LstmLayerWeights,
                      hidden: number): Float64Array[] {
  const inputSize = sequence[0].length;
  const h = new Float64Array(hidden);
  const c = new Float64Array(hidden);
  const gates = new Float64Array(4 * hidden);
  const outputs: Float64Array[] = [];
  for (const x of sequence) {
    for (let g = 0; g < 4 * hidden; g++) {
      let acc = layer.bias[g];
      const inRow = g * inputSize;
      for (let i = 0; i < inputSize; i++) {
        acc += layer.wIn[inRow + i] * x[i];
      }
      const recRow = g * hidden;
      for (let i = 0; i < hidden; i++) {
        acc += layer.wRec[recRow + i] * h[i];
      }
      gates[g] = acc;
    }
    for (let unit = 0; unit < hidden; unit++) {
      const input = sigmoid(gates[unit]);
      const forget = sigmoid(gates[hidden + unit]);
      const candidate = Math.tanh(gates[2 * hidden + unit]);
      const output = sigmoid(gates[3 * hidden + unit]);
      c[unit] = forget * c[unit] + input * candidate;
      h[unit] = output * Math.tanh(c[unit]);
    }
    outputs.push(Float64Array.from(h));
  }
  return outputs;
}

function validateWeights(weights: EncoderWeights): void {
  if (weights.layers.length < 1) {
    throw new Error("encoder weights need at least one LSTM layer");
  }
  const { hiddenSize, melChannels, dimension } = weights;
  let inputSize = melChannels;
  weights.layers.forEach((layer, index) => {
    if (layer.wIn.length !== 4 * hiddenSize * inputSize ||
        layer.wRec.length !== 4 * hiddenSize * hiddenSize ||
        layer.bias.length !== 4 * hiddenSize) {
      throw new Error(`layer ${index}: weight shapes do not match ` +
          `hidden=${hiddenSize} input=${inputSize}`);
    }
    inputSize = hiddenSize;
  });
  if (weights.projection.w.length !== dimension * hiddenSize ||
      weights.projection.bias.length !== dimension) {
    throw new Error("projection shape does not match dimension/hidden");
  }
}

/** xorshift128, good enough for a fixed projection matrix. */
function makeRng(seed: number): () => number {
  let s0 = seed >>> 0 || 1;
  let s1 = 0x9e3779b9;
  let s2 = 0x85ebca6b;
  let s3 = 0xc2b2ae35;
  return () => {
    const t = s1 << 9;
    s2 ^= s0;
    s3 ^= s1;
    s1 ^= s2;
    s0 ^= s3;
    s2 ^= t;
    s3 = (s3 << 11) | (s3 >>> 21);
    return ((s0 + s3) >>> 0) / 0x100000000;
  };
}

export class StubEncoder implements VoiceEncoder {
  readonly dimension: number;
  readonly name = "stub-encoder";
  private readonly projection: Float64Array;
  private readonly statsSize: number;

  constructor(melChannels = 40, dimension = EMBEDDING_DIMENSION, seed = 41) {
    this.dimension = dimension;
    this.statsSize = 2 * melChannels + 1; // means, stds, constant term
    const rng = makeRng(seed);
    this.projection = new Float64Array(dimension * this.statsSize);
    for (let i = 0; i < this.projection.length; i++) {
      // Box-Muller: roughly gaussian entries
      const u = Math.max(rng(), 1e-12);
      const v = rng();
      this.projection[i] =
          Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
    }
  }

  encode(frames: Float32Array[]): Float64Array {
    if (frames.length === 0) {
      throw new Error("cannot encode zero mel frames");
    }
    const channels = frames[0].length;
    const stats = new Float64Array(this.statsSize);
    for (let ch = 0; ch < channels; ch++) {
      let mean = 0;
      for (const frame of frames) {
        mean += frame[ch];
      }
      mean /= frames.length;
      let variance = 0;
      for (const frame of frames) {
        variance += (frame[ch] - mean) ** 2;
      }
      stats[ch] = mean;
      stats[channels + ch] = Math.sqrt(variance / frames.length);
    }
    stats[2 * channels] = 1.0;
    const out = new Float64Array(this.dimension);
    for (let d = 0; d < this.dimension; d++) {
      let acc = 0;
      const rowStart = d * this.statsSize;
      for (let s = 0; s < this.statsSize; s++) {
        acc += this.projection[rowStart + s] * stats[s];
      }
      out[d] = acc;
    }
    return l2Normalize(out);
  }
}
