/**
 * Embedding sources. A source maps a word type to a vector or null (miss).
 *
 *   word2vec:<path>  static vector set in the word-vector text format
 *   bertlike:<dir>   directory with vocab.txt (one piece per line, "##"
 *                    continuations) and embeddings.json (matrix aligned to
 *                    vocab.txt); a word's vector is the mean of its piece
 *                    rows from the model's input embedding matrix
 *   random:<dim>     deterministic per-token pseudo-random vectors (hash
 *                    seeded), handy for smoke tests and offline runs
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { parseEmbeddingFile, meanVectors } from "./format.js";
import { wordpieceTokenize } from "./wordpiece.js";

export interface EmbeddingSource {
  readonly dim: number;
  lookup(word: string): number[] | null;
}

class Word2VecSource implements EmbeddingSource {
  readonly dim: number;
  private table = new Map<string, number[]>();

  constructor(filePath: string) {
    const { rows, dim } = parseEmbeddingFile(fs.readFileSync(filePath, "utf-8"));
    this.dim = dim;
    for (const row of rows) this.table.set(row.token, row.vector);
  }

  lookup(word: string): number[] | null {
    return this.table.get(word) ?? null;
  }
}

class BertLikeSource implements EmbeddingSource {
  readonly dim: number;
  private pieces: Set<string>;
  private rowOf = new Map<string, number>();
  private matrix: number[][];

  constructor(dir: string) {
    const vocab = fs
      .readFileSync(path.join(dir, "vocab.txt"), "utf-8")
      .split("\n")
      .map((l) => l.trim())
      .filter((l) => l.length > 0);
    this.matrix = JSON.parse(fs.readFileSync(path.join(dir, "embeddings.json"), "utf-8"));
    if (this.matrix.length !== vocab.length) {
      throw new Error(
        `embeddings.json has ${this.matrix.length} rows but vocab.txt has ${vocab.length} pieces`,
      );
    }
    this.dim = this.matrix[0].length;
    this.pieces = new Set(vocab);
    vocab.forEach((p, i) => this.rowOf.set(p, i));
  }

  lookup(word: string): number[] | null {
    const pieces = wordpieceTokenize(word.toLowerCase(), this.pieces);
    if (pieces === null) return null;
    return meanVectors(pieces.map((p) => this.matrix[this.rowOf.get(p)!]));
  }
}

/** FNV-1a based deterministic generator; same token always maps to the same vector. */
class RandomSource implements EmbeddingSource {
  constructor(readonly dim: number) {}

  lookup(word: string): number[] {
    let h = 0x811c9dc5;
    for (const ch of word) {
      h ^= ch.codePointAt(0)!;
      h = Math.imul(h, 0x01000193) >>> 0;
    }
    const out = new Array<number>(this.dim);
    let state = h || 1;
    for (let i = 0; i < this.dim; i++) {
      // xorshift32
      state ^= state << 13;
      state >>>= 0;
      state ^= state >> 17;
      state ^= state << 5;
      state >>>= 0;
      out[i] = (state / 0xffffffff - 0.5) * 0.1;
    }
    return out;
  }
}

export function resolveSource(spec: string): EmbeddingSource {
  const sep = spec.indexOf(":");
  if (sep < 0) {
    throw new Error(`source must look like kind:argument, got ${JSON.stringify(spec)}`);
  }
  const kind = spec.slice(0, sep);
  const arg = spec.slice(sep + 1);
  switch (kind) {
    case "word2vec":
      return new Word2VecSource(arg);
    case "bertlike":
      return new BertLikeSource(arg);
    case "random": {
      const dim = Number(arg);
      if (!Number.isInteger(dim) || dim < 1) {
        throw new Error(`random source needs a positive dimension, got ${arg}`);
      }
      return new RandomSource(dim);
    }
    default:
      throw new Error(`unknown source kind ${JSON.stringify(kind)}`);
  }
}
