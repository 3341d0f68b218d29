import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Standard PCM16 mono/stereo WAV bytes from float samples. */
export function encodeWavPcm16(channels: Float32Array[],
                               sampleRate: number): Buffer {
  const channelCount = channels.length;
  const frames = channels[0].length;
  const dataBytes = frames * channelCount * 2;
  const buffer = Buffer.alloc(44 + dataBytes);
  buffer.write("RIFF", 0, "ascii");
  buffer.writeUInt32LE(36 + dataBytes, 4);
  buffer.write("WAVE", 8, "ascii");
  buffer.write("fmt ", 12, "ascii");
  buffer.writeUInt32LE(16, 16);
  buffer.writeUInt16LE(1, 20); // PCM
  buffer.writeUInt16LE(channelCount, 22);
  buffer.writeUInt32LE(sampleRate, 24);
  buffer.writeUInt32LE(sampleRate * channelCount * 2, 28);
  buffer.writeUInt16LE(channelCount * 2, 32);
  buffer.writeUInt16LE(16, 34);
  buffer.write("data", 36, "ascii");
  buffer.writeUInt32LE(dataBytes, 40);
  let offset = 44;
  for (let f = 0; f < frames; f++) {
    for (let c = 0; c < channelCount; c++) {
      const clamped = Math.max(-1, Math.min(1, channels[c][f]));
      buffer.writeInt16LE(Math.round(clamped * 32767), offset);
      offset += 2;
    }
  }
  return buffer;
}

/** A voice-ish test tone: fundamental plus two harmonics, mild vibrato. */
export function voiceLikeTone(fundamentalHz: number, seconds: number,
                              sampleRate = 16000): Float32Array {
  const samples = new Float32Array(Math.round(seconds * sampleRate));
  for (let i = 0; i < samples.length; i++) {
    const t = i / sampleRate;
    const vibrato = 1 + 0.01 * Math.sin(2 * Math.PI * 5 * t);
    const f = fundamentalHz * vibrato;
    samples[i] = 0.5 * Math.sin(2 * Math.PI * f * t) +
        0.25 * Math.sin(2 * Math.PI * 2 * f * t) +
        0.12 * Math.sin(2 * Math.PI * 3 * f * t);
  }
  return samples;
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeWavFile(dir: string, name: string,
                             samples: Float32Array,
                             sampleRate = 16000): string {
  const path = join(dir, name);
  writeFileSync(path, encodeWavPcm16([samples], sampleRate));
  return path;
}
