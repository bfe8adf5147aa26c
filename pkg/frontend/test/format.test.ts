import { describe, expect, it } from "vitest";

import { formatEmbeddingFile, meanVectors, parseEmbeddingFile } from "../src/format.js";

describe("embedding file format", () => {
  it("writes header then one row per token with LF endings", () => {
    const text = formatEmbeddingFile(
      [
        { token: "a", vector: [1, 2, 3] },
        { token: "b", vector: [4.5, -6, 7e-3] },
      ],
      3,
    );
    const lines = text.split("\n");
    expect(lines[0]).toBe("2 3");
    expect(lines[1]).toBe("a 1 2 3");
    expect(lines[2]).toBe("b 4.5 -6 0.007");
    expect(text.endsWith("\n")).toBe(true);
    expect(text.includes("\r")).toBe(false);
  });

  it("round-trips through its own parser", () => {
    const rows = [
      { token: "alpha", vector: [0.25, -1.125] },
      { token: "beta", vector: [1e-7, 42] },
    ];
    const parsed = parseEmbeddingFile(formatEmbeddingFile(rows, 2));
    expect(parsed.dim).toBe(2);
    expect(parsed.rows).toEqual(rows);
  });

  it("rejects dimension mismatches and whitespace tokens", () => {
    expect(() => formatEmbeddingFile([{ token: "a", vector: [1] }], 2)).toThrow(/expected 2/);
    expect(() => formatEmbeddingFile([{ token: "a b", vector: [1] }], 1)).toThrow(/whitespace/);
    expect(() => formatEmbeddingFile([{ token: "a", vector: [NaN] }], 1)).toThrow(/non-finite/);
  });

  it("value count must match the header dim when parsing", () => {
    expect(() => parseEmbeddingFile("1 3\na 1 2\n")).toThrow(/expected 3/);
  });

  it("averages vectors coordinate-wise", () => {
    expect(meanVectors([[1, 3], [3, 5]])).toEqual([2, 4]);
    expect(() => meanVectors([])).toThrow(/zero vectors/);
  });
});
