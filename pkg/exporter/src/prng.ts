/**
 * Seeded randomness helpers.
 *
 * Mask placement and speed-factor choice must be reproducible from the
 * input data alone so that re-exporting the same job yields identical
 * archives. Seeds are derived by hashing utterance ids; the generator is
 * splitmix32 with fixed constants, so the stream is stable across
 * platforms and runtimes.
 */

/** FNV-1a over the UTF-8 bytes of `text`, as an unsigned 32-bit value. */
export function fnv1a32(text: string): number {
  const bytes = Buffer.from(text, "utf-8");
  let hash = 0x811c9dc5;
  for (let i = 0; i < bytes.length; i++) {
    hash ^= bytes[i];
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Returns a generator of uniform doubles in [0, 1) seeded by `seed`. */
export function splitmix32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = z ^ (z >>> 15);
    return (z >>> 0) / 4294967296;
  };
}

/** Uniform integer in [lo, hi], both ends inclusive. */
export function randInt(next: () => number, lo: number, hi: number): number {
  if (hi < lo) {
    throw new Error(`empty integer range [${lo}, ${hi}]`);
  }
  return lo + Math.floor(next() * (hi - lo + 1));
}
