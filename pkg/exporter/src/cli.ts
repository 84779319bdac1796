#!/usr/bin/env node
/**
 * Command line entry point.
 *
 *   voxfuse-export export --manifest M --wav-dir D --transcripts T
 *                         --out-audio A --out-text X [--augment]
 *                         [--audio-checkpoint P] [--text-checkpoint P]
 *                         [--max-seconds N]
 *
 * Exit codes: 0 success, 1 job failure, 2 usage error.
 */
import * as path from "path";
import { parseArgs } from "util";

import { ExportError, runExport } from "./export";

const USAGE = [
  "usage: voxfuse-export export --manifest PATH --wav-dir DIR --transcripts PATH",
  "                             --out-audio PATH --out-text PATH [--augment]",
  "                             [--audio-checkpoint PATH] [--text-checkpoint PATH]",
  "                             [--max-seconds N]",
].join("\n");

class UsageError extends Error {}

/** Bundled checkpoints live next to the installed package. */
function defaultCheckpoint(file: string): string {
  // compiled output runs from dist/; the test runner imports the source
  // as ES modules from the package root, where __dirname is undefined
  const root =
    typeof __dirname !== "undefined" ? path.resolve(__dirname, "..") : process.cwd();
  return path.join(root, "checkpoints", file);
}

function parseExportArgs(argv: string[]) {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        manifest: { type: "string" },
        "wav-dir": { type: "string" },
        transcripts: { type: "string" },
        "out-audio": { type: "string" },
        "out-text": { type: "string" },
        augment: { type: "boolean", default: false },
        "audio-checkpoint": { type: "string" },
        "text-checkpoint": { type: "string" },
        "max-seconds": { type: "string" },
        help: { type: "boolean", default: false },
      },
      allowPositionals: false,
    });
  } catch (err) {
    throw new UsageError((err as Error).message);
  }
  const values = parsed.values;
  if (values.help) {
    return null;
  }
  for (const flag of ["manifest", "wav-dir", "transcripts", "out-audio", "out-text"]) {
    if (values[flag as keyof typeof values] === undefined) {
      throw new UsageError(`--${flag} is required`);
    }
  }
  let maxSeconds: number | undefined;
  if (values["max-seconds"] !== undefined) {
    maxSeconds = Number(values["max-seconds"]);
    if (!Number.isFinite(maxSeconds) || maxSeconds <= 0) {
      throw new UsageError(`--max-seconds must be a positive number, got ${values["max-seconds"]}`);
    }
  }
  return {
    manifestPath: values.manifest as string,
    wavDir: values["wav-dir"] as string,
    transcriptsPath: values.transcripts as string,
    outAudio: values["out-audio"] as string,
    outText: values["out-text"] as string,
    augment: values.augment as boolean,
    audioCheckpoint: values["audio-checkpoint"] ?? defaultCheckpoint("audio-backbone.json"),
    textCheckpoint: values["text-checkpoint"] ?? defaultCheckpoint("text-backbone.json"),
    maxSeconds,
  };
}

export function main(argv: string[]): number {
  try {
    if (argv.length === 0 || argv[0] === "--help" || argv[0] === "-h") {
      console.log(USAGE);
      return argv.length === 0 ? 2 : 0;
    }
    if (argv[0] !== "export") {
      throw new UsageError(`unknown command ${JSON.stringify(argv[0])}`);
    }
    const job = parseExportArgs(argv.slice(1));
    if (job === null) {
      console.log(USAGE);
      return 0;
    }
    const summary = runExport(job);
    console.log(`wrote ${summary.audioRecords} audio records to ${job.outAudio}`);
    console.log(`wrote ${summary.textRecords} text records to ${job.outText}`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      console.error(USAGE);
      return 2;
    }
    if (err instanceof ExportError) {
      for (const problem of err.problems) {
        console.error(`error: ${problem}`);
      }
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (typeof require !== "undefined" && require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
