import { Wave } from "./wav";

/** Loudness target: -20 dB relative to full scale. */
export const TARGET_RMS = 0.1;

/** Crop ceiling applied before feature extraction. */
export const MAX_SECONDS = 10;

/**
 * Crop to at most `maxSeconds` (centered), remove the DC offset, scale to
 * the -20 dB RMS target, and clip to [-1, 1].
 *
 * Export is inference, so the crop is deterministic. An all-constant
 * input centers to zero RMS and is returned unscaled.
 */
export function preprocessWaveform(w: Wave, maxSeconds: number = MAX_SECONDS): Wave {
  if (w.samples.length === 0) {
    throw new Error("cannot preprocess an empty waveform");
  }
  let x = w.samples;
  const maxLen = Math.round(maxSeconds * w.sampleRate);
  if (maxLen > 0 && x.length > maxLen) {
    const start = Math.floor((x.length - maxLen) / 2);
    x = x.subarray(start, start + maxLen);
  }

  let mean = 0;
  for (let i = 0; i < x.length; i++) {
    mean += x[i];
  }
  mean /= x.length;

  const out = new Float64Array(x.length);
  let sumSq = 0;
  for (let i = 0; i < x.length; i++) {
    out[i] = x[i] - mean;
    sumSq += out[i] * out[i];
  }
  const rms = Math.sqrt(sumSq / x.length);
  if (rms > 0) {
    const gain = TARGET_RMS / rms;
    for (let i = 0; i < out.length; i++) {
      out[i] = Math.min(1, Math.max(-1, out[i] * gain));
    }
  }
  return { samples: out, sampleRate: w.sampleRate };
}
