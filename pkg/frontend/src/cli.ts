#!/usr/bin/env node
/** Command line for the embedding exporter. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { exportLabelEmbeddings, exportVocabEmbeddings } from "./exporter.js";
import { resolveSource } from "./sources.js";

function report(kind: string, out: string, stats: { requested: number; written: number; missed: string[] }) {
  console.log(`${kind}: wrote ${stats.written}/${stats.requested} rows to ${out}`);
  if (stats.missed.length > 0) {
    console.log(`  omitted (not in source): ${stats.missed.slice(0, 10).join(", ")}` +
      (stats.missed.length > 10 ? ` and ${stats.missed.length - 10} more` : ""));
  }
}

await yargs(hideBin(process.argv))
  .scriptName("embed-exporter")
  .command(
    "export-vocab",
    "export one vector row per vocabulary token",
    (y) =>
      y
        .option("vocab", { type: "string", demandOption: true, describe: "one token per line" })
        .option("source", { type: "string", demandOption: true, describe: "word2vec:<path> | bertlike:<dir> | random:<dim>" })
        .option("out", { type: "string", demandOption: true }),
    (argv) => {
      const stats = exportVocabEmbeddings(argv.vocab, resolveSource(argv.source), argv.out);
      report("vocab", argv.out, stats);
    },
  )
  .command(
    "export-labels",
    "export one vector row per label name (multi-word names averaged)",
    (y) =>
      y
        .option("labels", { type: "string", demandOption: true, describe: "one label name per line" })
        .option("source", { type: "string", demandOption: true })
        .option("out", { type: "string", demandOption: true }),
    (argv) => {
      const stats = exportLabelEmbeddings(argv.labels, resolveSource(argv.source), argv.out);
      report("labels", argv.out, stats);
    },
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    console.error(`error: ${msg ?? err?.message}`);
    process.exit(2);
  })
  .parse();
