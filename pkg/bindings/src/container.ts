/**
 * Reader for the model container's manifest.
 *
 * Layout: magic "DPMM" | u32 LE format version | u64 LE manifest length |
 * manifest JSON | length-prefixed f64 tensors. The bindings only need the
 * manifest (domain and config); tensor payloads stay opaque.
 */

import { readFileSync } from "node:fs";

import { ValidationError } from "./errors.js";

const MAGIC = Buffer.from("DPMM", "ascii");
const SUPPORTED_VERSION = 1;

export interface DomainColumn {
  name: string;
  kind: "categorical" | "numerical";
  categories?: string[];
  bounds?: [number, number];
  structural_zeros?: unknown[];
}

export interface DomainDocument {
  columns: DomainColumn[];
}

export interface ContainerManifest {
  format_version: number;
  config: Record<string, unknown>;
  domain: DomainDocument;
  disc_domain: DomainDocument;
  ledger: { total_rho: number; spent_rho: number; log: [string, number][] };
  plan: { measurements_spec: unknown[]; provenance: Record<string, unknown> };
  [key: string]: unknown;
}

export function readManifest(path: string): ContainerManifest {
  const buf = readFileSync(path);
  if (buf.length < 16 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new ValidationError(`${path}: not a model container (bad magic bytes)`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== SUPPORTED_VERSION) {
    throw new ValidationError(
      `${path}: unsupported format_version ${version}; expected ${SUPPORTED_VERSION}`,
    );
  }
  const manifestLength = Number(buf.readBigUInt64LE(8));
  if (16 + manifestLength > buf.length) {
    throw new ValidationError(`${path}: container is truncated`);
  }
  const raw = buf.subarray(16, 16 + manifestLength).toString("utf-8");
  try {
    return JSON.parse(raw) as ContainerManifest;
  } catch (err) {
    throw new ValidationError(`${path}: corrupt manifest: ${String(err)}`);
  }
}
