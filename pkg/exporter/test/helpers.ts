import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { fileURLToPath } from "url";

export const PACKAGE_ROOT = fileURLToPath(new URL("..", import.meta.url));
export const FIXTURES = path.join(PACKAGE_ROOT, "fixtures");
export const CHECKPOINTS = path.join(PACKAGE_ROOT, "checkpoints");

export function makeTempDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "voxfuse-exporter-"));
}

/** PCM16 mono WAV encoder for synthesized test inputs. */
export function encodeWavPcm16(samples: ArrayLike<number>, sampleRate: number): Buffer {
  const dataBytes = 2 * samples.length;
  const buf = Buffer.alloc(44 + dataBytes);
  buf.write("RIFF", 0, "latin1");
  buf.writeUInt32LE(36 + dataBytes, 4);
  buf.write("WAVE", 8, "latin1");
  buf.write("fmt ", 12, "latin1");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20);
  buf.writeUInt16LE(1, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "latin1");
  buf.writeUInt32LE(dataBytes, 40);
  for (let i = 0; i < samples.length; i++) {
    const q = Math.max(-32768, Math.min(32767, Math.round(samples[i] * 32767)));
    buf.writeInt16LE(q, 44 + 2 * i);
  }
  return buf;
}

export function sineWave(freq: number, seconds: number, sampleRate: number): Float64Array {
  const n = Math.round(seconds * sampleRate);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = 0.4 * Math.sin((2 * Math.PI * freq * i) / sampleRate);
  }
  return out;
}
