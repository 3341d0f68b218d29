/**
 * Minimal RIFF/WAVE decoder: PCM16, PCM24, PCM32 and IEEE float32,
 * any channel count (mixed down to mono), resampled to a target rate.
 */

export interface DecodedAudio {
  /** mono samples in [-1, 1] at `sampleRate` */
  samples: Float32Array;
  sampleRate: number;
  /** duration of the original file in seconds */
  durationSeconds: number;
}

export class AudioDecodeError extends Error {}

export function decodeWav(buffer: Buffer): DecodedAudio {
  if (buffer.length < 44 || buffer.toString("ascii", 0, 4) !== "RIFF" ||
      buffer.toString("ascii", 8, 12) !== "WAVE") {
    throw new AudioDecodeError("not a RIFF/WAVE file");
  }

  let format = 0;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;

  let offset = 12;
  while (offset + 8 <= buffer.length) {
    const chunkId = buffer.toString("ascii", offset, offset + 4);
    const chunkSize = buffer.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (chunkId === "fmt ") {
      format = buffer.readUInt16LE(body);
      channels = buffer.readUInt16LE(body + 2);
      sampleRate = buffer.readUInt32LE(body + 4);
      bitsPerSample = buffer.readUInt16LE(body + 14);
    } else if (chunkId === "data") {
      data = buffer.subarray(body, Math.min(body + chunkSize, buffer.length));
    }
    offset = body + chunkSize + (chunkSize % 2);
  }

  if (!data || channels < 1 || sampleRate < 1) {
    throw new AudioDecodeError("missing fmt or data chunk");
  }

  let read: (frame: number, channel: number) => number;
  const frameBytes = channels * (bitsPerSample / 8);
  const frames = Math.floor(data.length / frameBytes);
  if (frames < 1) {
    throw new AudioDecodeError("empty data chunk");
  }
  const pcm = data;
  if (format === 1 && bitsPerSample === 16) {
    read = (f, c) => pcm.readInt16LE(f * frameBytes + c * 2) / 32768;
  } else if (format === 1 && bitsPerSample === 24) {
    read = (f, c) => {
      const base = f * frameBytes + c * 3;
      const raw = pcm[base] | (pcm[base + 1] << 8) | (pcm[base + 2] << 16);
      return (raw > 0x7fffff ? raw - 0x1000000 : raw) / 8388608;
    };
  } else if (format === 1 && bitsPerSample === 32) {
    read = (f, c) => pcm.readInt32LE(f * frameBytes + c * 4) / 2147483648;
  } else if (format === 3 && bitsPerSample === 32) {
    read = (f, c) => pcm.readFloatLE(f * frameBytes + c * 4);
  } else {
    throw new AudioDecodeError(
      `unsupported encoding: format ${format}, ${bitsPerSample} bits`);
  }

  const mono = new Float32Array(frames);
  for (let f = 0; f < frames; f++) {
    let sum = 0;
    for (let c = 0; c < channels; c++) {
      sum += read(f, c);
    }
    mono[f] = sum / channels;
  }
  return {
    samples: mono,
    sampleRate,
    durationSeconds: frames / sampleRate,
  };
}

/** Linear-interpolation resampler; returns the input when rates match. */
export function resample(samples: Float32Array, fromRate: number,
                         toRate: number): Float32Array {
  if (fromRate === toRate) {
    return samples;
  }
  const outLength = Math.max(1, Math.round(samples.length * toRate / fromRate));
  const out = new Float32Array(outLength);
  const step = fromRate / toRate;
  for (let i = 0; i < outLength; i++) {
    const position = i * step;
    const low = Math.floor(position);
    const high = Math.min(low + 1, samples.length - 1);
    const frac = position - low;
    out[i] = samples[Math.min(low, samples.length - 1)] * (1 - frac) +
        samples[high] * frac;
  }
  return out;
}
