/**
 * The word-vector text format consumed by the classifier: a header line
 * "count dim", then one line per token with the token followed by `dim`
 * reals, space separated, UTF-8, LF line endings, "." decimal separator.
 */

export interface EmbeddingRow {
  token: string;
  vector: number[];
}

export function formatEmbeddingFile(rows: EmbeddingRow[], dim: number): string {
  const lines = [`${rows.length} ${dim}`];
  for (const row of rows) {
    if (row.vector.length !== dim) {
      throw new Error(
        `row for ${JSON.stringify(row.token)} has ${row.vector.length} values, expected ${dim}`,
      );
    }
    if (/\s/.test(row.token)) {
      throw new Error(`token ${JSON.stringify(row.token)} contains whitespace`);
    }
    for (const v of row.vector) {
      if (!Number.isFinite(v)) {
        throw new Error(`non-finite component in row for ${JSON.stringify(row.token)}`);
      }
    }
    lines.push(`${row.token} ${row.vector.map((v) => v.toString()).join(" ")}`);
  }
  return lines.join("\n") + "\n";
}

export function parseEmbeddingFile(content: string): { rows: EmbeddingRow[]; dim: number } {
  const lines = content.split("\n");
  const header = lines[0].trim().split(/\s+/);
  if (header.length !== 2) {
    throw new Error(`malformed header: ${JSON.stringify(lines[0])}`);
  }
  const dim = Number(header[1]);
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`bad dimension in header: ${header[1]}`);
  }
  const rows: EmbeddingRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const fields = line.split(" ");
    if (fields.length !== dim + 1) {
      throw new Error(`line ${i + 1}: expected ${dim} values, got ${fields.length - 1}`);
    }
    const vector = fields.slice(1).map(Number);
    if (vector.some((v) => !Number.isFinite(v))) {
      throw new Error(`line ${i + 1}: non-numeric component`);
    }
    rows.push({ token: fields[0], vector });
  }
  return { rows, dim };
}

export function meanVectors(vectors: number[][]): number[] {
  if (vectors.length === 0) {
    throw new Error("mean of zero vectors");
  }
  const dim = vectors[0].length;
  const out = new Array<number>(dim).fill(0);
  for (const v of vectors) {
    for (let i = 0; i < dim; i++) out[i] += v[i];
  }
  for (let i = 0; i < dim; i++) out[i] /= vectors.length;
  return out;
}
