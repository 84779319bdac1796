/**
 * Spectral frontend: framed log band energies.
 *
 * Frames are Hann-windowed 25 ms windows at a 10 ms hop. Each frame is
 * reduced to `nBins` band energies by quadrature correlation against
 * evenly spaced probe frequencies, i.e. a direct DFT evaluated only at
 * the band centers. Deterministic, no padding beyond the short-input
 * case, no external FFT dependency needed at these sizes.
 */
import { Wave } from "./wav";

export const WINDOW_SECONDS = 0.025;
export const HOP_SECONDS = 0.01;
export const LOG_EPS = 1e-10;

// probe band placement, as fractions of the sample rate
const MIN_FREQ_HZ = 60;
const MAX_FREQ_FRACTION = 0.45;

/** Row-major time x frequency grid of log band energies. */
export interface FeatureMatrix {
  data: Float64Array;
  nFrames: number;
  nBins: number;
}

export function logBandEnergies(w: Wave, nBins: number): FeatureMatrix {
  if (nBins < 1) {
    throw new Error(`nBins must be >= 1, got ${nBins}`);
  }
  const x = w.samples;
  const win = Math.max(2, Math.round(WINDOW_SECONDS * w.sampleRate));
  const hop = Math.max(1, Math.round(HOP_SECONDS * w.sampleRate));

  let frames: Float64Array;
  let nFrames: number;
  if (x.length < win) {
    // single zero-padded frame for very short inputs
    nFrames = 1;
    frames = new Float64Array(win);
    frames.set(x);
  } else {
    nFrames = Math.floor((x.length - win) / hop) + 1;
    frames = new Float64Array(nFrames * win);
    for (let t = 0; t < nFrames; t++) {
      for (let i = 0; i < win; i++) {
        frames[t * win + i] = x[t * hop + i];
      }
    }
  }

  const hann = new Float64Array(win);
  for (let i = 0; i < win; i++) {
    hann[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (win - 1));
  }

  // windowed quadrature probes, precomputed per band
  const cosTab = new Float64Array(nBins * win);
  const sinTab = new Float64Array(nBins * win);
  const loHz = Math.min(MIN_FREQ_HZ, MAX_FREQ_FRACTION * w.sampleRate);
  const hiHz = MAX_FREQ_FRACTION * w.sampleRate;
  for (let b = 0; b < nBins; b++) {
    const freq = nBins === 1 ? loHz : loHz + ((hiHz - loHz) * b) / (nBins - 1);
    const omega = (2 * Math.PI * freq) / w.sampleRate;
    for (let i = 0; i < win; i++) {
      cosTab[b * win + i] = hann[i] * Math.cos(omega * i);
      sinTab[b * win + i] = hann[i] * Math.sin(omega * i);
    }
  }

  const data = new Float64Array(nFrames * nBins);
  for (let t = 0; t < nFrames; t++) {
    for (let b = 0; b < nBins; b++) {
      let re = 0;
      let im = 0;
      for (let i = 0; i < win; i++) {
        const s = frames[t * win + i];
        re += s * cosTab[b * win + i];
        im += s * sinTab[b * win + i];
      }
      data[t * nBins + b] = Math.log(re * re + im * im + LOG_EPS);
    }
  }
  return { data, nFrames, nBins };
}
