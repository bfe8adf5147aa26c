/**
 * Export routines producing the classifier's embedding file format from a
 * pretrained source, for token vocabularies and for label names.
 */

import * as fs from "node:fs";

import { EmbeddingRow, formatEmbeddingFile, meanVectors } from "./format.js";
import { EmbeddingSource } from "./sources.js";

export interface ExportStats {
  requested: number;
  written: number;
  missed: string[];
}

function readLines(filePath: string): string[] {
  return fs
    .readFileSync(filePath, "utf-8")
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
}

/**
 * One row per vocabulary token found in the source; misses are omitted (the
 * classifier's loader gives them seeded random rows).
 */
export function exportVocabEmbeddings(
  vocabPath: string,
  source: EmbeddingSource,
  outPath: string,
): ExportStats {
  const tokens = readLines(vocabPath);
  if (tokens.length === 0) throw new Error(`${vocabPath}: empty vocabulary`);
  const rows: EmbeddingRow[] = [];
  const missed: string[] = [];
  for (const token of tokens) {
    const vector = source.lookup(token);
    if (vector === null) {
      missed.push(token);
    } else {
      rows.push({ token, vector });
    }
  }
  fs.writeFileSync(outPath, formatEmbeddingFile(rows, source.dim), "utf-8");
  return { requested: tokens.length, written: rows.length, missed };
}

/**
 * One row per label name (one name per line, possibly multi-word). The row
 * is the unweighted mean of the name's word vectors; words the source does
 * not know are skipped, and a label with no known words is omitted. Spaces
 * in the token field become underscores.
 */
export function exportLabelEmbeddings(
  labelsPath: string,
  source: EmbeddingSource,
  outPath: string,
): ExportStats {
  const names = readLines(labelsPath);
  if (names.length === 0) throw new Error(`${labelsPath}: empty label list`);
  const rows: EmbeddingRow[] = [];
  const missed: string[] = [];
  for (const name of names) {
    const words = name.toLowerCase().split(/\s+/);
    const vectors = words
      .map((w) => source.lookup(w))
      .filter((v): v is number[] => v !== null);
    if (vectors.length === 0) {
      missed.push(name);
      continue;
    }
    rows.push({ token: name.replace(/\s+/g, "_"), vector: meanVectors(vectors) });
  }
  fs.writeFileSync(outPath, formatEmbeddingFile(rows, source.dim), "utf-8");
  return { requested: names.length, written: rows.length, missed };
}
