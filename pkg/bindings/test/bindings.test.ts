import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  BudgetError,
  InfeasibleConditionError,
  ModelHandle,
  ValidationError,
  bindEvaluate,
  bindFit,
  bindGenerate,
  bindGenerateCsv,
  loadModel,
  readManifest,
  saveModel,
} from "../src/index.js";
import { csvToTable } from "../src/csv.js";
import type { DomainDocument } from "../src/container.js";

const DATA_DIR = resolve(__dirname, "../../src/dpsynth/data");
const CSV_PATH = join(DATA_DIR, "mixed5.csv");
const DOMAIN_PATH = join(DATA_DIR, "mixed5_domain.json");

const domain = JSON.parse(readFileSync(DOMAIN_PATH, "utf-8")) as DomainDocument;
const dataset = csvToTable(readFileSync(CSV_PATH, "utf-8"), domain);

const scratch: string[] = [];
const handles: ModelHandle[] = [];

afterAll(() => {
  for (const h of handles) h.release();
  for (const dir of scratch) rmSync(dir, { recursive: true, force: true });
});

function fitOnce(seed = 7): ModelHandle {
  const handle = bindFit(
    { model: "mst", epsilon: 1.0, delta: 1e-5, seed },
    dataset,
    domain,
  );
  handles.push(handle);
  return handle;
}

describe("bindFit", () => {
  it("produces a container byte-identical to the CLI under equal seed", () => {
    const handle = fitOnce(7);
    const dir = mkdtempSync(join(tmpdir(), "parity-"));
    scratch.push(dir);
    const cliOut = join(dir, "cli.dpmm");
    const run = spawnSync(
      process.env.DPSYNTH_CLI ?? "dpsynth",
      [
        "fit", "--model", "mst", "--epsilon", "1.0", "--delta", "1e-05",
        "--seed", "7", "--data", CSV_PATH, "--domain", DOMAIN_PATH,
        "--out", cliOut,
      ],
      { encoding: "utf-8" },
    );
    expect(run.status, run.stderr).toBe(0);
    const viaBindings = readFileSync(handle.containerPath);
    const viaCli = readFileSync(cliOut);
    expect(viaBindings.equals(viaCli)).toBe(true);
  });

  it("rejects an invalid domain with the column named", () => {
    const bad: DomainDocument = {
      columns: [
        { name: "weight", kind: "numerical", bounds: [40, 0] as [number, number] },
      ],
    };
    expect(() =>
      bindFit({ model: "mst", epsilon: 1.0, seed: 1 }, dataset, bad),
    ).toThrowError(ValidationError);
    try {
      bindFit({ model: "mst", epsilon: 1.0, seed: 1 }, dataset, bad);
    } catch (err) {
      expect((err as Error).message).toContain("weight");
    }
  });

  it("maps missing preprocessing budget to BudgetError", () => {
    const unbounded: DomainDocument = {
      columns: [
        { name: "weight", kind: "numerical" },
        { name: "length", kind: "numerical" },
      ],
    };
    const numericOnly = {
      names: ["weight", "length"],
      columns: [dataset.columns[3], dataset.columns[4]],
    };
    expect(() =>
      bindFit({ model: "mst", epsilon: 1.0, seed: 1 }, numericOnly, unbounded),
    ).toThrowError(BudgetError);
  });
});

describe("bindGenerate", () => {
  it("synthetic CSV content is byte-identical to the CLI's under equal seed", () => {
    const handle = fitOnce(7);
    const viaBindings = bindGenerateCsv(handle, 200, {}, 11);

    const dir = mkdtempSync(join(tmpdir(), "parity-gen-"));
    scratch.push(dir);
    const cliOut = join(dir, "synth.csv");
    const run = spawnSync(
      process.env.DPSYNTH_CLI ?? "dpsynth",
      [
        "generate", "--model", handle.containerPath, "--rows", "200",
        "--seed", "11", "--out", cliOut,
      ],
      { encoding: "utf-8" },
    );
    expect(run.status, run.stderr).toBe(0);
    expect(viaBindings).toBe(readFileSync(cliOut, "utf-8"));
  });

  it("returns typed columns of the requested length", () => {
    const handle = fitOnce(3);
    const table = bindGenerate(handle, 150, {}, 2);
    expect(table.names).toEqual(["color", "size", "shape", "weight", "length"]);
    expect(table.columns[0]).toHaveLength(150);
    expect(table.columns[3]).toBeInstanceOf(Float64Array);
    expect(typeof (table.columns[0] as string[])[0]).toBe("string");
  });

  it("satisfies every condition in every generated row", () => {
    const handle = fitOnce(3);
    const table = bindGenerate(
      handle, 120, { color: "red", weight: [0, 20] }, 5,
    );
    const color = table.columns[table.names.indexOf("color")] as string[];
    const weight = table.columns[table.names.indexOf("weight")] as Float64Array;
    expect(color.every((v) => v === "red")).toBe(true);
    expect(Array.from(weight).every((v) => v >= 0 && v <= 20)).toBe(true);
  });

  it("raises InfeasibleConditionError for impossible intervals", () => {
    const handle = fitOnce(3);
    expect(() =>
      bindGenerate(handle, 5, { weight: [0.001, 0.002] }, 1),
    ).toThrowError(InfeasibleConditionError);
  });

  it("handle survives across calls until released", () => {
    const handle = fitOnce(9);
    const first = bindGenerate(handle, 10, {}, 1);
    const second = bindGenerate(handle, 10, {}, 1);
    expect(first).toEqual(second);
    handle.release();
  });
});

describe("bindEvaluate", () => {
  it("scores identical tables near 1 with the CLI's report keys", () => {
    const report = bindEvaluate(dataset, dataset, domain, { seed: 1 });
    expect(Object.keys(report).sort()).toEqual([
      "distinguishability", "mean", "similarity_1way", "similarity_2way",
    ]);
    expect(report.mean).toBeGreaterThanOrEqual(0.95);
    expect(report.similarity_1way).toBe(1.0);
  });

  it("is deterministic given a seed", () => {
    const handle = fitOnce(3);
    const synth = bindGenerate(handle, 300, {}, 4);
    const r1 = bindEvaluate(dataset, synth, domain, { seed: 9 });
    const r2 = bindEvaluate(dataset, synth, domain, { seed: 9 });
    expect(r1).toEqual(r2);
  });
});

describe("container round-trips", () => {
  it("saveModel/loadModel preserve generation behavior", () => {
    const handle = fitOnce(13);
    const dir = mkdtempSync(join(tmpdir(), "savemodel-"));
    scratch.push(dir);
    const path = join(dir, "model.dpmm");
    saveModel(handle, path);
    const reloaded = loadModel(path);
    expect(bindGenerateCsv(reloaded, 50, {}, 21)).toBe(
      bindGenerateCsv(handle, 50, {}, 21),
    );
    expect(reloaded.manifest.config.model).toBe("mst");
    expect(reloaded.manifest.ledger.spent_rho).toBeLessThanOrEqual(
      reloaded.manifest.ledger.total_rho + 1e-12,
    );
  });

  it("readManifest rejects junk", () => {
    const dir = mkdtempSync(join(tmpdir(), "junk-"));
    scratch.push(dir);
    const path = join(dir, "junk.bin");
    writeFileSync(path, Buffer.from("not a container"));
    expect(() => readManifest(path)).toThrowError(ValidationError);
  });
});
