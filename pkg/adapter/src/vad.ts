/**
 * Energy-based voice activity segmentation for long recordings:
 * frames with RMS above a fraction of the loud-frame level are voiced,
 * voiced runs separated by short gaps merge, and too-short segments are
 * dropped. Optional; single-utterance audio should skip it.
 */

export interface Segment {
  /** sample offsets into the 16 kHz signal */
  start: number;
  end: number;
}

const FRAME = 400; // 25 ms at 16 kHz
const HOP = 160; // 10 ms
const MERGE_GAP_FRAMES = 30; // 300 ms
const MIN_SEGMENT_FRAMES = 40; // 400 ms
const LEVEL_FRACTION = 0.1;

export function segmentBySpeechEnergy(samples: Float32Array): Segment[] {
  const frameCount = Math.max(1, 1 + Math.floor((samples.length - FRAME) / HOP));
  const rms = new Float64Array(frameCount);
  let peak = 0;
  for (let f = 0; f < frameCount; f++) {
    const start = f * HOP;
    let acc = 0;
    const end = Math.min(start + FRAME, samples.length);
    for (let i = start; i < end; i++) {
      acc += samples[i] * samples[i];
    }
    rms[f] = Math.sqrt(acc / Math.max(end - start, 1));
    peak = Math.max(peak, rms[f]);
  }
  const threshold = Math.max(1e-4, LEVEL_FRACTION * peak);

  const voiced: Segment[] = [];
  let runStart = -1;
  for (let f = 0; f <= frameCount; f++) {
    const active = f < frameCount && rms[f] >= threshold;
    if (active && runStart < 0) {
      runStart = f;
    } else if (!active && runStart >= 0) {
      voiced.push({ start: runStart, end: f });
      runStart = -1;
    }
  }

  const merged: Segment[] = [];
  for (const run of voiced) {
    const last = merged[merged.length - 1];
    if (last && run.start - last.end <= MERGE_GAP_FRAMES) {
      last.end = run.end;
    } else {
      merged.push({ ...run });
    }
  }

  const kept = merged.filter(
      (run) => run.end - run.start >= MIN_SEGMENT_FRAMES);
  if (kept.length === 0) {
    return [{ start: 0, end: samples.length }];
  }
  return kept.map((run) => ({
    start: run.start * HOP,
    end: Math.min(run.end * HOP + FRAME, samples.length),
  }));
}
