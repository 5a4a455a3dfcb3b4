/** Split rendered terms into clickable token spans.
 *
 * Purely lexical: the client never interprets the math, it only decides
 * which spans may link to a knowledge-base definition and how to colour
 * them. A name is a constant when the service has a definition for it,
 * otherwise it renders as a plain variable. */

export type TokenKind = "space" | "num" | "name" | "bound" | "dd" | "op" | "punct";

export interface Token {
  text: string;
  kind: TokenKind;
}

const PATTERNS: [TokenKind, RegExp][] = [
  ["space", /^\s+/],
  ["dd", /^d\/d(?![A-Za-z0-9_])/],
  ["num", /^\d+(?:\/\d+)?/],
  ["name", /^[A-Za-z_][A-Za-z0-9_]*/],
  ["op", /^(?:<=|>=|!=|[+\-*/^=<>&])/],
  ["punct", /^[()[\],]/],
];

export function tokenize(term: string): Token[] {
  const out: Token[] = [];
  let rest = term;
  while (rest.length > 0) {
    let matched = false;
    for (const [kind, re] of PATTERNS) {
      const m = re.exec(rest);
      if (m && m[0].length > 0) {
        out.push({ text: m[0], kind });
        rest = rest.slice(m[0].length);
        matched = true;
        break;
      }
    }
    if (!matched) {
      // unknown character: pass through as punctuation
      out.push({ text: rest.charAt(0), kind: "punct" });
      rest = rest.slice(1);
    }
  }
  return markBound(out);
}

/** The name following a d/d token is a bound variable; mark every later
 * occurrence of it in the same term as bound too. */
function markBound(tokens: Token[]): Token[] {
  const bound = new Set<string>();
  for (let i = 0; i < tokens.length; i++) {
    const tok = tokens[i]!;
    if (tok.kind !== "dd") continue;
    for (let j = i + 1; j < tokens.length; j++) {
      const nxt = tokens[j]!;
      if (nxt.kind === "space") continue;
      if (nxt.kind === "name") bound.add(nxt.text);
      break;
    }
  }
  if (bound.size === 0) return tokens;
  return tokens.map((t) =>
    t.kind === "name" && bound.has(t.text) ? { ...t, kind: "bound" } : t,
  );
}

/** Tokens that may resolve to a definition when clicked. */
export function isLinkCandidate(t: Token): boolean {
  return t.kind === "name" || t.kind === "op" || t.kind === "dd";
}
