/**
 * Embedding backbones loaded from local JSON checkpoints.
 *
 * The audio backbone mean-pools the feature grid over time and applies a
 * fixed linear projection from the checkpoint. The text backbone hashes
 * character trigrams into the output dimensions with signed counts, then
 * applies the checkpoint's per-dimension gain through tanh. Both run in
 * inference mode only: same input and checkpoint, same vector, exactly.
 *
 * The bundled checkpoints are lightweight stand-ins sized to the
 * toolkit's expected dimensions (audio 192, text 768); a real extractor
 * can be swapped in by emitting the same JSON schema.
 */
import * as fs from "fs";

import { FeatureMatrix } from "./features";
import { fnv1a32 } from "./prng";

const CHECKPOINT_FORMAT = "voxfuse-backbone";
const CHECKPOINT_VERSION = 1;

export interface AudioBackbone {
  kind: "audio";
  dim: number;
  nBins: number;
  /** Row-major nBins x dim projection. */
  weights: Float64Array;
}

export interface TextBackbone {
  kind: "text";
  dim: number;
  gain: Float64Array;
}

function loadCheckpoint(path: string, kind: string): any {
  let parsed: any;
  try {
    parsed = JSON.parse(fs.readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`${path}: unreadable checkpoint: ${(err as Error).message}`);
  }
  if (parsed?.format !== CHECKPOINT_FORMAT) {
    throw new Error(`${path}: not a ${CHECKPOINT_FORMAT} checkpoint`);
  }
  if (parsed.version !== CHECKPOINT_VERSION) {
    throw new Error(`${path}: unsupported checkpoint version ${parsed.version}`);
  }
  if (parsed.kind !== kind) {
    throw new Error(`${path}: expected a ${kind} checkpoint, got ${parsed.kind}`);
  }
  return parsed;
}

export function loadAudioBackbone(path: string): AudioBackbone {
  const ck = loadCheckpoint(path, "audio");
  const nBins = ck.n_bins;
  const dim = ck.dim;
  if (!Number.isInteger(nBins) || nBins < 1 || !Number.isInteger(dim) || dim < 1) {
    throw new Error(`${path}: invalid n_bins/dim (${nBins}, ${dim})`);
  }
  if (!Array.isArray(ck.weights) || ck.weights.length !== nBins) {
    throw new Error(`${path}: weights must have ${nBins} rows`);
  }
  const weights = new Float64Array(nBins * dim);
  for (let b = 0; b < nBins; b++) {
    const row = ck.weights[b];
    if (!Array.isArray(row) || row.length !== dim) {
      throw new Error(`${path}: weights row ${b} must have ${dim} entries`);
    }
    for (let d = 0; d < dim; d++) {
      const v = row[d];
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new Error(`${path}: non-finite weight at (${b}, ${d})`);
      }
      weights[b * dim + d] = v;
    }
  }
  return { kind: "audio", dim, nBins, weights };
}

export function loadTextBackbone(path: string): TextBackbone {
  const ck = loadCheckpoint(path, "text");
  const dim = ck.dim;
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`${path}: invalid dim ${dim}`);
  }
  if (!Array.isArray(ck.gain) || ck.gain.length !== dim) {
    throw new Error(`${path}: gain must have ${dim} entries`);
  }
  const gain = new Float64Array(dim);
  for (let d = 0; d < dim; d++) {
    const v = ck.gain[d];
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new Error(`${path}: non-finite gain at ${d}`);
    }
    gain[d] = v;
  }
  return { kind: "text", dim, gain };
}

/** Mean-pool the frames and project; output is archive-precision f32. */
export function audioEmbedding(backbone: AudioBackbone, feats: FeatureMatrix): Float32Array {
  if (feats.nBins !== backbone.nBins) {
    throw new Error(
      `feature grid has ${feats.nBins} bands, audio backbone expects ${backbone.nBins}`
    );
  }
  const pooled = new Float64Array(backbone.nBins);
  for (let t = 0; t < feats.nFrames; t++) {
    for (let b = 0; b < backbone.nBins; b++) {
      pooled[b] += feats.data[t * feats.nBins + b];
    }
  }
  const out = new Float64Array(backbone.dim);
  for (let b = 0; b < backbone.nBins; b++) {
    const p = pooled[b] / feats.nFrames;
    for (let d = 0; d < backbone.dim; d++) {
      out[d] += p * backbone.weights[b * backbone.dim + d];
    }
  }
  return Float32Array.from(out);
}

/** Signed hashed trigram frequencies through the checkpoint gain. */
export function textEmbedding(backbone: TextBackbone, text: string): Float32Array {
  if (text.trim().length === 0) {
    throw new Error("cannot embed an empty transcript");
  }
  // boundary markers guarantee at least one trigram for any non-empty text
  const padded = `^${text}$`;
  const counts = new Float64Array(backbone.dim);
  const nTrigrams = padded.length - 2;
  for (let i = 0; i < nTrigrams; i++) {
    const h = fnv1a32(padded.slice(i, i + 3));
    const sign = ((h >>> 16) & 1) === 0 ? 1 : -1;
    counts[h % backbone.dim] += sign;
  }
  const out = new Float64Array(backbone.dim);
  for (let d = 0; d < backbone.dim; d++) {
    out[d] = Math.tanh((backbone.gain[d] * counts[d]) / nTrigrams);
  }
  return Float32Array.from(out);
}
