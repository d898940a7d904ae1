#!/usr/bin/env node
import { mkdirSync, writeFileSync } from "node:fs";
import { basename, dirname } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { renderSweep, type FigureKind } from "./render.js";
import { loadSweepCsv, SchemaError, SWEEP_COLUMNS, type SweepColumn } from "./schema.js";

async function run(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .option("in", {
      type: "string",
      array: true,
      demandOption: true,
      describe: "sweep CSV file(s), one series per file",
    })
    .option("kind", {
      choices: ["loglog-decay", "ratio-band", "slope-fit"] as const,
      demandOption: true,
    })
    .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
    .option("column", {
      type: "string",
      choices: SWEEP_COLUMNS as unknown as string[],
      describe: "override the column the figure kind plots by default",
    })
    .strict()
    .parse();

  try {
    const inputs = (args.in as string[]).map((path) => ({
      name: basename(path).replace(/\.csv$/, ""),
      rows: loadSweepCsv(path),
    }));
    const svg = renderSweep({
      kind: args.kind as FigureKind,
      inputs,
      column: args.column as SweepColumn | undefined,
    });
    mkdirSync(dirname(args.out as string), { recursive: true });
    writeFileSync(args.out as string, svg, "utf8");
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

run(hideBin(process.argv)).then((code) => {
  process.exitCode = code;
});
