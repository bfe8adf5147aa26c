/**
 * Greedy longest-match-first subword tokenization over a piece vocabulary,
 * with "##" marking continuation pieces (the usual convention of BERT-style
 * vocab.txt files).
 */

export function wordpieceTokenize(word: string, pieces: Set<string>, maxChars = 100): string[] | null {
  if (word.length > maxChars) return null;
  const out: string[] = [];
  let start = 0;
  while (start < word.length) {
    let end = word.length;
    let piece: string | null = null;
    while (start < end) {
      let candidate = word.slice(start, end);
      if (start > 0) candidate = "##" + candidate;
      if (pieces.has(candidate)) {
        piece = candidate;
        break;
      }
      end--;
    }
    if (piece === null) return null; // unknown character sequence
    out.push(piece);
    start = end;
  }
  return out;
}
