/**
 * Minimal RIFF/WAVE reader for 16-bit PCM mono files.
 *
 * That is the only encoding the bundled fixtures and typical speech
 * corpora use here; anything else is rejected with a clear message
 * rather than silently resampled or downmixed.
 */
import * as fs from "fs";

export interface Wave {
  /** Samples scaled to [-1, 1). */
  samples: Float64Array;
  sampleRate: number;
}

interface Chunk {
  id: string;
  start: number;
  size: number;
}

function scanChunks(data: Buffer, name: string): Chunk[] {
  const chunks: Chunk[] = [];
  let offset = 12;
  while (offset + 8 <= data.length) {
    const id = data.toString("latin1", offset, offset + 4);
    const size = data.readUInt32LE(offset + 4);
    chunks.push({ id, start: offset + 8, size });
    if (offset + 8 + size > data.length) {
      throw new Error(`${name}: chunk ${JSON.stringify(id)} overruns the file`);
    }
    // chunk payloads are padded to even length
    offset += 8 + size + (size % 2);
  }
  return chunks;
}

/** Decode a WAV byte buffer; `name` is used in error messages only. */
export function decodeWav(data: Buffer, name = "<buffer>"): Wave {
  if (data.length < 12 || data.toString("latin1", 0, 4) !== "RIFF") {
    throw new Error(`${name}: not a RIFF file`);
  }
  if (data.toString("latin1", 8, 12) !== "WAVE") {
    throw new Error(`${name}: RIFF file is not WAVE`);
  }
  const chunks = scanChunks(data, name);
  const fmt = chunks.find((c) => c.id === "fmt ");
  const dataChunk = chunks.find((c) => c.id === "data");
  if (!fmt || fmt.size < 16) {
    throw new Error(`${name}: missing or short fmt chunk`);
  }
  if (!dataChunk) {
    throw new Error(`${name}: missing data chunk`);
  }

  const format = data.readUInt16LE(fmt.start);
  const channels = data.readUInt16LE(fmt.start + 2);
  const sampleRate = data.readUInt32LE(fmt.start + 4);
  const bitsPerSample = data.readUInt16LE(fmt.start + 14);
  if (format !== 1) {
    throw new Error(`${name}: only PCM is supported, got format code ${format}`);
  }
  if (channels !== 1) {
    throw new Error(`${name}: only mono is supported, got ${channels} channels`);
  }
  if (bitsPerSample !== 16) {
    throw new Error(`${name}: only 16-bit samples are supported, got ${bitsPerSample}`);
  }
  if (sampleRate <= 0) {
    throw new Error(`${name}: invalid sample rate ${sampleRate}`);
  }
  if (dataChunk.size % 2 !== 0) {
    throw new Error(`${name}: data chunk has an odd byte count`);
  }

  const n = dataChunk.size / 2;
  const samples = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = data.readInt16LE(dataChunk.start + 2 * i) / 32768;
  }
  return { samples, sampleRate };
}

export function readWavFile(path: string): Wave {
  return decodeWav(fs.readFileSync(path), path);
}
