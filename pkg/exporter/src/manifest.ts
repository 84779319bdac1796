/**
 * Tab-separated input files: the dataset manifest shared with the main
 * toolkit, and the transcript table (utterance id to spoken text).
 */
import * as fs from "fs";

export const MANIFEST_HEADER = "utterance_id\tspeaker_id\tgender\tsplit\tsource_tag";
export const TRANSCRIPTS_HEADER = "utterance_id\ttext";

const GENDERS = new Set(["F", "M"]);
const SPLITS = new Set(["train", "dev_enroll", "dev_trial", "test_enroll", "test_trial"]);

export interface ManifestEntry {
  utteranceId: string;
  speakerId: string;
  gender: "F" | "M";
  split: string;
  sourceTag: string;
}

function readLines(path: string, expectedHeader: string): [number, string][] {
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  if (lines.length === 0 || lines[0].replace(/\r$/, "") !== expectedHeader) {
    throw new Error(`${path}:1: expected header ${JSON.stringify(expectedHeader)}`);
  }
  const rows: [number, string][] = [];
  for (let i = 1; i < lines.length; i++) {
    const raw = lines[i].replace(/\r$/, "");
    if (raw.length > 0) {
      rows.push([i + 1, raw]);
    }
  }
  return rows;
}

/** Parse a manifest; entries come back sorted by utterance id. */
export function readManifest(path: string): ManifestEntry[] {
  const entries: ManifestEntry[] = [];
  const seen = new Set<string>();
  for (const [lineno, raw] of readLines(path, MANIFEST_HEADER)) {
    const fields = raw.split("\t");
    if (fields.length !== 5) {
      throw new Error(`${path}:${lineno}: expected 5 fields, got ${fields.length}`);
    }
    const [utteranceId, speakerId, gender, split, sourceTag] = fields;
    if (utteranceId.length === 0 || speakerId.length === 0) {
      throw new Error(`${path}:${lineno}: empty utterance or speaker id`);
    }
    if (!GENDERS.has(gender)) {
      throw new Error(`${path}:${lineno}: unknown gender ${JSON.stringify(gender)}`);
    }
    if (!SPLITS.has(split)) {
      throw new Error(`${path}:${lineno}: unknown split ${JSON.stringify(split)}`);
    }
    if (seen.has(utteranceId)) {
      throw new Error(`${path}:${lineno}: duplicate utterance_id ${JSON.stringify(utteranceId)}`);
    }
    seen.add(utteranceId);
    entries.push({ utteranceId, speakerId, gender: gender as "F" | "M", split, sourceTag });
  }
  entries.sort((a, b) => (a.utteranceId < b.utteranceId ? -1 : a.utteranceId > b.utteranceId ? 1 : 0));
  return entries;
}

/**
 * Parse the transcript table. Only the first tab separates the id from
 * the text, so transcripts may contain further tabs verbatim.
 */
export function readTranscripts(path: string): Map<string, string> {
  const out = new Map<string, string>();
  for (const [lineno, raw] of readLines(path, TRANSCRIPTS_HEADER)) {
    const tab = raw.indexOf("\t");
    if (tab <= 0) {
      throw new Error(`${path}:${lineno}: expected 'utterance_id<TAB>text'`);
    }
    const utteranceId = raw.slice(0, tab);
    if (out.has(utteranceId)) {
      throw new Error(`${path}:${lineno}: duplicate utterance_id ${JSON.stringify(utteranceId)}`);
    }
    out.set(utteranceId, raw.slice(tab + 1));
  }
  return out;
}
