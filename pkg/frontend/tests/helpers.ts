/** Shared test plumbing: the wire schema and validators compiled from it. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { Ajv2020 } from "ajv/dist/2020.js";
import type { ValidateFunction } from "ajv";

const here = dirname(fileURLToPath(import.meta.url));

/** protocol.schema.json from the repository root — the shared contract. */
export const SCHEMA_PATH = join(here, "..", "..", "protocol.schema.json");

export interface WireSchema {
  version: number;
  max_message_bytes: number;
  client: Record<string, unknown>;
  server: Record<string, unknown>;
  [key: string]: unknown;
}

export function loadSchema(): WireSchema {
  return JSON.parse(readFileSync(SCHEMA_PATH, "utf8")) as WireSchema;
}

function compileHalf(schema: WireSchema, half: "client" | "server"): ValidateFunction {
  const ajv = new Ajv2020({ strict: false, allErrors: true });
  return ajv.compile({ ...schema, $ref: `#/${half}` });
}

export function clientValidator(): ValidateFunction {
  return compileHalf(loadSchema(), "client");
}

export function serverValidator(): ValidateFunction {
  return compileHalf(loadSchema(), "server");
}

export function formatErrors(validate: ValidateFunction): string {
  return (validate.errors ?? [])
    .map((e) => `${e.instancePath || "/"} ${e.message ?? ""}`)
    .join("; ");
}
