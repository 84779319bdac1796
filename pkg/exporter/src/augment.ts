/**
 * Acoustic augmentations applied before the audio backbone: spectral
 * masks on the feature grid and speed perturbation on the waveform.
 * Each variant is a pure function of (input, seed or factor).
 */
import { FeatureMatrix } from "./features";
import { randInt, splitmix32 } from "./prng";
import { Wave } from "./wav";

function maskSpan(size: number, maxWidth: number, seed: number): [number, number] {
  const next = splitmix32(seed);
  const width = randInt(next, 1, maxWidth);
  const start = randInt(next, 0, size - width);
  return [start, width];
}

function checkWidth(maxWidth: number, size: number): void {
  if (maxWidth < 0 || maxWidth > size) {
    throw new Error(`maxWidth must be in [0, ${size}], got ${maxWidth}`);
  }
}

/** Zero one seeded contiguous span of at most `maxWidth` time frames. */
export function timeMask(f: FeatureMatrix, maxWidth: number, seed: number): FeatureMatrix {
  checkWidth(maxWidth, f.nFrames);
  const out = { data: f.data.slice(), nFrames: f.nFrames, nBins: f.nBins };
  if (maxWidth === 0) {
    return out;
  }
  const [start, width] = maskSpan(f.nFrames, maxWidth, seed);
  out.data.fill(0, start * f.nBins, (start + width) * f.nBins);
  return out;
}

/** Zero one seeded contiguous span of at most `maxWidth` frequency bands. */
export function freqMask(f: FeatureMatrix, maxWidth: number, seed: number): FeatureMatrix {
  checkWidth(maxWidth, f.nBins);
  const out = { data: f.data.slice(), nFrames: f.nFrames, nBins: f.nBins };
  if (maxWidth === 0) {
    return out;
  }
  const [start, width] = maskSpan(f.nBins, maxWidth, seed);
  for (let t = 0; t < f.nFrames; t++) {
    out.data.fill(0, t * f.nBins + start, t * f.nBins + start + width);
  }
  return out;
}

/**
 * Resample to round(n / factor) samples by endpoint-matched linear
 * interpolation. The sample rate is unchanged, so factor > 1 plays the
 * utterance faster (shorter waveform).
 */
export function speedPerturb(w: Wave, factor: number): Wave {
  if (factor <= 0) {
    throw new Error(`speed factor must be positive, got ${factor}`);
  }
  const n = w.samples.length;
  if (n === 0) {
    throw new Error("cannot speed-perturb an empty waveform");
  }
  const outLen = Math.max(1, Math.round(n / factor));
  if (outLen === n) {
    return { samples: w.samples.slice(), sampleRate: w.sampleRate };
  }
  if (outLen === 1 || n === 1) {
    return { samples: Float64Array.of(w.samples[0]), sampleRate: w.sampleRate };
  }
  const out = new Float64Array(outLen);
  const step = (n - 1) / (outLen - 1);
  for (let i = 0; i < outLen; i++) {
    const pos = i * step;
    const lo = Math.min(Math.floor(pos), n - 2);
    const frac = pos - lo;
    out[i] = w.samples[lo] * (1 - frac) + w.samples[lo + 1] * frac;
  }
  return { samples: out, sampleRate: w.sampleRate };
}
