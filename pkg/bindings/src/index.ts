/**
 * In-process bindings for the dpsynth synthesizer.
 *
 * The bindings never reimplement any DP logic: they marshal column-major
 * arrays through the synthesizer's stable process interface (the CLI plus
 * its CSV / domain-JSON / container formats) and translate exit codes into
 * typed exceptions. Identical config and seed therefore produce results
 * byte-identical to driving the CLI by hand.
 */

import { spawnSync } from "node:child_process";
import { copyFileSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ContainerManifest, DomainDocument, readManifest } from "./container.js";
import { Column, ColumnarTable, csvToTable, tableToCsv } from "./csv.js";
import {
  BudgetError,
  CliNotFoundError,
  DpSynthError,
  InfeasibleConditionError,
  ValidationError,
  errorForExit,
} from "./errors.js";

export {
  BudgetError,
  CliNotFoundError,
  DpSynthError,
  InfeasibleConditionError,
  ValidationError,
};
export type { Column, ColumnarTable, ContainerManifest, DomainDocument };
export { readManifest };

export interface FitConfig {
  model: "privbayes" | "mst" | "aim";
  epsilon: number;
  delta?: number;
  epsilonProc?: number;
  degree?: number;
  sizeCapMb?: number;
  discretization?: "privtree" | "uniform";
  bins?: number;
  seed?: number;
}

export type ConditionValue = string | number | [number, number];

export interface UtilityReport {
  similarity_1way: number;
  similarity_2way: number;
  distinguishability: number;
  mean: number;
}

function cliBinary(): string {
  return process.env.DPSYNTH_CLI ?? "dpsynth";
}

function runCli(args: string[]): string {
  const result = spawnSync(cliBinary(), args, {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (result.error) {
    throw new CliNotFoundError(
      `could not spawn ${cliBinary()}: ${result.error.message}`,
    );
  }
  if (result.status !== 0) {
    throw errorForExit(result.status ?? -1, result.stderr);
  }
  return result.stdout;
}

/**
 * Opaque handle to a fitted model. The handle stays valid across calls
 * until release() is invoked.
 */
export class ModelHandle {
  readonly containerPath: string;
  readonly manifest: ContainerManifest;
  private workdir: string | null;

  constructor(containerPath: string, workdir: string | null = null) {
    this.containerPath = containerPath;
    this.manifest = readManifest(containerPath);
    this.workdir = workdir;
  }

  get domain(): DomainDocument {
    return this.manifest.domain;
  }

  /** Remove the handle's scratch directory; the handle becomes invalid. */
  release(): void {
    if (this.workdir !== null) {
      rmSync(this.workdir, { recursive: true, force: true });
      this.workdir = null;
    }
  }
}

function configArgs(config: FitConfig): string[] {
  const args = ["--model", config.model, "--epsilon", String(config.epsilon)];
  if (config.delta !== undefined) args.push("--delta", String(config.delta));
  if (config.epsilonProc !== undefined) {
    args.push("--proc-epsilon", String(config.epsilonProc));
  }
  if (config.degree !== undefined) args.push("--degree", String(config.degree));
  if (config.sizeCapMb !== undefined) {
    args.push("--size-cap-mb", String(config.sizeCapMb));
  }
  if (config.discretization !== undefined) {
    args.push("--discretization", config.discretization);
  }
  if (config.bins !== undefined) args.push("--bins", String(config.bins));
  if (config.seed !== undefined) args.push("--seed", String(config.seed));
  return args;
}

/** Train a synthesizer on column-major data under the given config. */
export function bindFit(
  config: FitConfig,
  data: ColumnarTable,
  domain: DomainDocument,
  publicData?: ColumnarTable,
): ModelHandle {
  const workdir = mkdtempSync(join(tmpdir(), "dpsynth-"));
  try {
    const dataPath = join(workdir, "data.csv");
    const domainPath = join(workdir, "domain.json");
    const outPath = join(workdir, "model.dpmm");
    writeFileSync(dataPath, tableToCsv(data));
    writeFileSync(domainPath, JSON.stringify(domain));
    const args = [
      "fit",
      ...configArgs(config),
      "--data", dataPath,
      "--domain", domainPath,
      "--out", outPath,
    ];
    if (publicData) {
      const publicPath = join(workdir, "public.csv");
      writeFileSync(publicPath, tableToCsv(publicData));
      args.push("--public-data", publicPath);
    }
    runCli(args);
    return new ModelHandle(outPath, workdir);
  } catch (err) {
    rmSync(workdir, { recursive: true, force: true });
    throw err;
  }
}

function conditionArgs(conditions: Record<string, ConditionValue>): string[] {
  const args: string[] = [];
  for (const [name, value] of Object.entries(conditions)) {
    const rendered = Array.isArray(value)
      ? `${name}=${value[0]}..${value[1]}`
      : `${name}=${value}`;
    args.push("--condition", rendered);
  }
  return args;
}

/** Sample n rows, optionally under conditions; returns column-major arrays. */
export function bindGenerate(
  handle: ModelHandle,
  n: number,
  conditions: Record<string, ConditionValue> = {},
  seed?: number,
): ColumnarTable {
  const csv = bindGenerateCsv(handle, n, conditions, seed);
  return csvToTable(csv, handle.domain);
}

/** Same as bindGenerate but returns the raw CSV text the synthesizer wrote. */
export function bindGenerateCsv(
  handle: ModelHandle,
  n: number,
  conditions: Record<string, ConditionValue> = {},
  seed?: number,
): string {
  const out = join(mkdtempSync(join(tmpdir(), "dpsynth-gen-")), "synth.csv");
  try {
    const args = [
      "generate",
      "--model", handle.containerPath,
      "--rows", String(n),
      ...conditionArgs(conditions),
      "--out", out,
    ];
    if (seed !== undefined) args.push("--seed", String(seed));
    runCli(args);
    return readFileSync(out, "utf-8");
  } finally {
    rmSync(join(out, ".."), { recursive: true, force: true });
  }
}

/** Utility report (three scores plus mean) for synthetic vs real columns. */
export function bindEvaluate(
  real: ColumnarTable,
  synth: ColumnarTable,
  domain: DomainDocument,
  options: { bins?: number; seed?: number } = {},
): UtilityReport {
  const workdir = mkdtempSync(join(tmpdir(), "dpsynth-eval-"));
  try {
    const realPath = join(workdir, "real.csv");
    const synthPath = join(workdir, "synth.csv");
    const domainPath = join(workdir, "domain.json");
    writeFileSync(realPath, tableToCsv(real));
    writeFileSync(synthPath, tableToCsv(synth));
    writeFileSync(domainPath, JSON.stringify(domain));
    const args = [
      "evaluate",
      "--real", realPath,
      "--synth", synthPath,
      "--domain", domainPath,
    ];
    if (options.bins !== undefined) args.push("--bins", String(options.bins));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    return JSON.parse(runCli(args)) as UtilityReport;
  } finally {
    rmSync(workdir, { recursive: true, force: true });
  }
}

/** Persist the fitted model container to a caller-owned path. */
export function saveModel(handle: ModelHandle, path: string): void {
  copyFileSync(handle.containerPath, path);
}

/** Re-attach to a previously saved container. */
export function loadModel(path: string): ModelHandle {
  return new ModelHandle(path);
}
