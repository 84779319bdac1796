/**
 * Export job: resolve every manifest utterance to a waveform and a
 * transcript, run the backbones, and write one audio and one text VXA1
 * archive.
 *
 * Resolution problems (missing or unreadable waveform, missing or empty
 * transcript) are collected across the whole job and reported together;
 * nothing is written unless every utterance resolves.
 */
import * as fs from "fs";
import * as path from "path";

import { freqMask, speedPerturb, timeMask } from "./augment";
import {
  AudioBackbone,
  TextBackbone,
  audioEmbedding,
  loadAudioBackbone,
  loadTextBackbone,
  textEmbedding,
} from "./backbone";
import { FeatureMatrix, logBandEnergies } from "./features";
import { ManifestEntry, readManifest, readTranscripts } from "./manifest";
import { MAX_SECONDS, preprocessWaveform } from "./preprocess";
import { fnv1a32, splitmix32 } from "./prng";
import { Archive, ArchiveRecord, writeArchiveFile } from "./vxa1";
import { Wave, readWavFile } from "./wav";

// variant knobs, shared with the synthetic corpus the toolkit trains on
export const TIME_MASK_WIDTH = 10;
export const FREQ_MASK_WIDTH = 4;
export const SPEED_FACTORS = [0.9, 1.1] as const;

export interface ExportJob {
  manifestPath: string;
  wavDir: string;
  transcriptsPath: string;
  outAudio: string;
  outText: string;
  augment: boolean;
  audioCheckpoint: string;
  textCheckpoint: string;
  maxSeconds?: number;
}

export interface ExportSummary {
  utterances: number;
  audioRecords: number;
  textRecords: number;
}

/** Raised when one or more utterances fail to resolve or embed. */
export class ExportError extends Error {
  constructor(public problems: string[]) {
    super(
      problems.length === 1
        ? problems[0]
        : `${problems.length} utterances failed:\n  ${problems.join("\n  ")}`
    );
    this.name = "ExportError";
  }
}

interface ResolvedUtterance {
  entry: ManifestEntry;
  wave: Wave;
  transcript: string;
}

function resolveInputs(
  entries: ManifestEntry[],
  job: ExportJob,
  transcripts: Map<string, string>
): ResolvedUtterance[] {
  const problems: string[] = [];
  const resolved: ResolvedUtterance[] = [];
  for (const entry of entries) {
    const wavPath = path.join(job.wavDir, `${entry.utteranceId}.wav`);
    let wave: Wave | null = null;
    if (!fs.existsSync(wavPath)) {
      problems.push(`${entry.utteranceId}: waveform not found: ${wavPath}`);
    } else {
      try {
        wave = readWavFile(wavPath);
      } catch (err) {
        problems.push(`${entry.utteranceId}: ${(err as Error).message}`);
      }
    }
    const transcript = transcripts.get(entry.utteranceId);
    if (transcript === undefined) {
      problems.push(`${entry.utteranceId}: no transcript line`);
    } else if (transcript.trim().length === 0) {
      problems.push(`${entry.utteranceId}: transcript is empty`);
    }
    if (wave !== null && transcript !== undefined && transcript.trim().length > 0) {
      resolved.push({ entry, wave, transcript });
    }
  }
  if (problems.length > 0) {
    throw new ExportError(problems);
  }
  return resolved;
}

function variantSeed(utteranceId: string, variant: string): number {
  return fnv1a32(`${utteranceId}:${variant}`);
}

function audioVariants(
  backbone: AudioBackbone,
  utterance: ResolvedUtterance,
  maxSeconds: number,
  augment: boolean
): ArchiveRecord[] {
  const { entry, wave } = utterance;
  const clean = preprocessWaveform(wave, maxSeconds);
  const feats = logBandEnergies(clean, backbone.nBins);
  const record = (augmentation: 0 | 1 | 2 | 3, f: FeatureMatrix): ArchiveRecord => ({
    speakerId: entry.speakerId,
    utteranceId: entry.utteranceId,
    augmentation,
    vector: audioEmbedding(backbone, f),
  });

  const records = [record(0, feats)];
  if (!augment) {
    return records;
  }
  records.push(record(1, timeMask(feats, Math.min(TIME_MASK_WIDTH, feats.nFrames),
                                  variantSeed(entry.utteranceId, "time_mask"))));
  records.push(record(2, freqMask(feats, Math.min(FREQ_MASK_WIDTH, feats.nBins),
                                  variantSeed(entry.utteranceId, "freq_mask"))));
  const pick = splitmix32(variantSeed(entry.utteranceId, "speed"))();
  const factor = SPEED_FACTORS[Math.floor(pick * SPEED_FACTORS.length)];
  const perturbed = preprocessWaveform(speedPerturb(wave, factor), maxSeconds);
  records.push(record(3, logBandEnergies(perturbed, backbone.nBins)));
  return records;
}

export function runExport(job: ExportJob): ExportSummary {
  const audioBackbone = loadAudioBackbone(job.audioCheckpoint);
  const textBackbone: TextBackbone = loadTextBackbone(job.textCheckpoint);
  const entries = readManifest(job.manifestPath);
  const transcripts = readTranscripts(job.transcriptsPath);
  const maxSeconds = job.maxSeconds ?? MAX_SECONDS;
  if (maxSeconds <= 0) {
    throw new Error(`maxSeconds must be positive, got ${maxSeconds}`);
  }

  const resolved = resolveInputs(entries, job, transcripts);

  const audioRecords: ArchiveRecord[] = [];
  const textRecords: ArchiveRecord[] = [];
  for (const utterance of resolved) {
    audioRecords.push(...audioVariants(audioBackbone, utterance, maxSeconds, job.augment));
    textRecords.push({
      speakerId: utterance.entry.speakerId,
      utteranceId: utterance.entry.utteranceId,
      augmentation: 0,
      vector: textEmbedding(textBackbone, utterance.transcript),
    });
  }

  const audioArchive: Archive = {
    modality: "audio",
    dimension: audioBackbone.dim,
    records: audioRecords,
  };
  const textArchive: Archive = {
    modality: "text",
    dimension: textBackbone.dim,
    records: textRecords,
  };
  writeArchiveFile(audioArchive, job.outAudio);
  writeArchiveFile(textArchive, job.outText);
  return {
    utterances: resolved.length,
    audioRecords: audioRecords.length,
    textRecords: textRecords.length,
  };
}
