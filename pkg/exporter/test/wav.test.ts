import { describe, expect, it } from "vitest";

import { decodeWav } from "../src/wav";
import { encodeWavPcm16, sineWave } from "./helpers";

describe("decodeWav", () => {
  it("round-trips PCM16 samples within quantization error", () => {
    const samples = sineWave(440, 0.05, 16000);
    const wave = decodeWav(encodeWavPcm16(samples, 16000));
    expect(wave.sampleRate).toBe(16000);
    expect(wave.samples.length).toBe(samples.length);
    for (let i = 0; i < samples.length; i++) {
      expect(Math.abs(wave.samples[i] - samples[i])).toBeLessThan(1 / 32768);
    }
  });

  it("keeps samples inside [-1, 1)", () => {
    const loud = [1.5, -1.5, 0.0, 0.9999];
    const wave = decodeWav(encodeWavPcm16(loud, 8000));
    expect(wave.samples[0]).toBeCloseTo(32767 / 32768, 10);
    expect(wave.samples[1]).toBe(-1);
  });

  it("rejects non-RIFF input", () => {
    expect(() => decodeWav(Buffer.from("not a wav file at all"))).toThrow(/RIFF/);
  });

  it("rejects RIFF that is not WAVE", () => {
    const buf = encodeWavPcm16([0, 0], 8000);
    buf.write("AVI ", 8, "latin1");
    expect(() => decodeWav(buf)).toThrow(/WAVE/);
  });

  it("rejects stereo", () => {
    const buf = encodeWavPcm16([0, 0], 8000);
    buf.writeUInt16LE(2, 22);
    expect(() => decodeWav(buf)).toThrow(/mono/);
  });

  it("rejects non-PCM format codes", () => {
    const buf = encodeWavPcm16([0, 0], 8000);
    buf.writeUInt16LE(3, 20); // IEEE float
    expect(() => decodeWav(buf)).toThrow(/PCM/);
  });

  it("rejects 8-bit samples", () => {
    const buf = encodeWavPcm16([0, 0], 8000);
    buf.writeUInt16LE(8, 34);
    expect(() => decodeWav(buf)).toThrow(/16-bit/);
  });

  it("rejects a data chunk that overruns the file", () => {
    const buf = encodeWavPcm16([0, 0, 0, 0], 8000);
    expect(() => decodeWav(buf.subarray(0, buf.length - 3), "clipped.wav")).toThrow(
      /overruns/
    );
  });

  it("skips unknown chunks before data", () => {
    const base = encodeWavPcm16([0.25, -0.25], 8000);
    // splice a LIST chunk between fmt and data
    const extra = Buffer.alloc(12);
    extra.write("LIST", 0, "latin1");
    extra.writeUInt32LE(4, 4);
    extra.write("info", 8, "latin1");
    const buf = Buffer.concat([base.subarray(0, 36), extra, base.subarray(36)]);
    buf.writeUInt32LE(buf.length - 8, 4);
    const wave = decodeWav(buf);
    expect(wave.samples.length).toBe(2);
    expect(wave.samples[0]).toBeCloseTo(0.25, 3);
  });
});
