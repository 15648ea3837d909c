#!/usr/bin/env node
import { writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { readTable, SchemaError, SWEEP_COLUMNS } from "./csv";
import { renderEpsSweep } from "./epsSweep";

const args = yargs(hideBin(process.argv))
  .usage("$0 --csv <eps_sweep.csv> --out <figure.svg>")
  .option("csv", { type: "string", demandOption: true, describe: "radius sweep CSV from the dro subcommand" })
  .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
  .option("log-y", { type: "boolean", default: false, describe: "log scale on the value axis" })
  .option("caption", { type: "string", describe: "caption under the figure" })
  .strict()
  .parseSync();

try {
  const table = readTable(args.csv, SWEEP_COLUMNS);
  writeFileSync(args.out, renderEpsSweep(table, { logY: args["log-y"], caption: args.caption }));
  console.log(`wrote ${args.out}`);
} catch (err) {
  if (err instanceof SchemaError || err instanceof Error) {
    console.error(`error: ${err.message}`);
    process.exit(1);
  }
  throw err;
}
