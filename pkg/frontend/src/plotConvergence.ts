#!/usr/bin/env node
import { writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { renderConvergence } from "./convergence";
import { CONVERGENCE_COLUMNS, readTable, SchemaError } from "./csv";

const args = yargs(hideBin(process.argv))
  .usage("$0 --csv <results.csv> --out <figure.svg>")
  .option("csv", { type: "string", demandOption: true, describe: "results CSV from a pipeline run" })
  .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
  .option("caption", { type: "string", describe: "caption under the figure" })
  .strict()
  .parseSync();

try {
  const table = readTable(args.csv, CONVERGENCE_COLUMNS);
  writeFileSync(args.out, renderConvergence(table, { caption: args.caption }));
  console.log(`wrote ${args.out}`);
} catch (err) {
  if (err instanceof SchemaError || err instanceof Error) {
    console.error(`error: ${err.message}`);
    process.exit(1);
  }
  throw err;
}
