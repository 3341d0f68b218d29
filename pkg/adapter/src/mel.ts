/**
 * Log-mel spectrogram frontend for the voice encoder: 40 mel channels
 * over 25 ms Hann windows with a 10 ms hop at 16 kHz, FFT size 512.
 */

export const SAMPLE_RATE = 16000;
export const MEL_CHANNELS = 40;
export const WINDOW_MS = 25;
export const HOP_MS = 10;

const WINDOW_SAMPLES = (SAMPLE_RATE * WINDOW_MS) / 1000; // 400
const HOP_SAMPLES = (SAMPLE_RATE * HOP_MS) / 1000; // 160
const FFT_SIZE = 512;
const LOG_FLOOR = 1e-10;

function hannWindow(length: number): Float32Array {
  const window = new Float32Array(length);
  for (let i = 0; i < length; i++) {
    window[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (length - 1));
  }
  return window;
}

/** In-place iterative radix-2 FFT over interleaved-free re/im arrays. */
function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let length = 2; length <= n; length <<= 1) {
    const angle = (-2 * Math.PI) / length;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let start = 0; start < n; start += length) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < length / 2; k++) {
        const evenIndex = start + k;
        const oddIndex = start + k + length / 2;
        const tRe = re[oddIndex] * curRe - im[oddIndex] * curIm;
        const tIm = re[oddIndex] * curIm + im[oddIndex] * curRe;
        re[oddIndex] = re[evenIndex] - tRe;
        im[oddIndex] = im[evenIndex] - tIm;
        re[evenIndex] += tRe;
        im[evenIndex] += tIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

function hzToMel(hz: number): number {
  return 2595 * Math.log10(1 + hz / 700);
}

function melToHz(mel: number): number {
  return 700 * (Math.pow(10, mel / 2595) - 1);
}

/** Triangular filters over FFT bins, mel-spaced from 0 Hz to Nyquist. */
function melFilterbank(): Float32Array[] {
  const bins = FFT_SIZE / 2 + 1;
  const melMax = hzToMel(SAMPLE_RATE / 2);
  const centers: number[] = [];
  for (let m = 0; m < MEL_CHANNELS + 2; m++) {
    const hz = melToHz((melMax * m) / (MEL_CHANNELS + 1));
    centers.push((hz * FFT_SIZE) / SAMPLE_RATE);
  }
  const filters: Float32Array[] = [];
  for (let m = 1; m <= MEL_CHANNELS; m++) {
    const filter = new Float32Array(bins);
    const [lo, mid, hi] = [centers[m - 1], centers[m], centers[m + 1]];
    for (let bin = 0; bin < bins; bin++) {
      if (bin > lo && bin < mid) {
        filter[bin] = (bin - lo) / (mid - lo);
      } else if (bin >= mid && bin < hi) {
        filter[bin] = (hi - bin) / (hi - mid);
      }
    }
    filters.push(filter);
  }
  return filters;
}

let cachedWindow: Float32Array | null = null;
let cachedFilters: Float32Array[] | null = null;

/**
 * Frames of 40 log-mel energies; audio must already be at 16 kHz.
 * Returns one Float32Array per frame. Audio shorter than one window
 * yields a single zero-padded frame.
 */
export function logMelSpectrogram(samples: Float32Array): Float32Array[] {
  cachedWindow ??= hannWindow(WINDOW_SAMPLES);
  cachedFilters ??= melFilterbank();

  const frameCount = Math.max(
    1, 1 + Math.floor((samples.length - WINDOW_SAMPLES) / HOP_SAMPLES));
  const frames: Float32Array[] = [];
  const re = new Float64Array(FFT_SIZE);
  const im = new Float64Array(FFT_SIZE);
  const power = new Float64Array(FFT_SIZE / 2 + 1);
  for (let frame = 0; frame < frameCount; frame++) {
    re.fill(0);
    im.fill(0);
    const start = frame * HOP_SAMPLES;
    const available = Math.min(WINDOW_SAMPLES, samples.length - start);
    for (let i = 0; i < available; i++) {
      re[i] = samples[start + i] * cachedWindow[i];
    }
    fft(re, im);
    for (let bin = 0; bin <= FFT_SIZE / 2; bin++) {
      power[bin] = re[bin] * re[bin] + im[bin] * im[bin];
    }
    const mel = new Float32Array(MEL_CHANNELS);
    for (let m = 0; m < MEL_CHANNELS; m++) {
      const filter = cachedFilters[m];
      let acc = 0;
      for (let bin = 0; bin < filter.length; bin++) {
        acc += filter[bin] * power[bin];
      }
      mel[m] = Math.log(Math.max(acc, LOG_FLOOR));
    }
    frames.push(mel);
  }
  return frames;
}
