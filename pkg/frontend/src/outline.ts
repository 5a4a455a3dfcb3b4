/** Flatten a calculation tree into visible outline rows.
 *
 * The flattening mirrors the service's own `view` rendering line for line,
 * so the client outline can be checked verbatim against the `view` string
 * the service returns for the same expansion set. */

import type { CalcNode, ProblemNode, StepNode } from "./api.js";

export interface OutlineRow {
  /** Node id for problem and step rows; the owning block for the rest. */
  id: number;
  depth: number;
  kind: "problem" | "model" | "step" | "result";
  text: string;
  /** Rows that own children and react to a collapse control. */
  collapsible: boolean;
  expanded: boolean;
}

function capitalize(s: string): string {
  return s.charAt(0).toUpperCase() + s.slice(1).toLowerCase();
}

export function flattenOutline(
  tree: CalcNode,
  expanded: ReadonlySet<number>,
): OutlineRow[] {
  const rows: OutlineRow[] = [];

  function emitBlock(b: ProblemNode, depth: number): void {
    const isOpen = expanded.has(b.id);
    rows.push({
      id: b.id,
      depth,
      kind: "problem",
      text: `Problem: ${b.problem.join("/")}  (#${b.id})`,
      collapsible: true,
      expanded: isOpen,
    });
    if (b.model !== null) {
      for (const [field, items] of Object.entries(b.model)) {
        for (const s of items) {
          rows.push({
            id: b.id,
            depth,
            kind: "model",
            text: `  ${capitalize(field)}: ${s}`,
            collapsible: false,
            expanded: false,
          });
        }
      }
    }
    if (isOpen) {
      for (const item of b.items) emitItem(item, depth + 1);
      if (b.result !== null) {
        rows.push({
          id: b.id,
          depth,
          kind: "result",
          text: `  Result: ${b.result}`,
          collapsible: false,
          expanded: false,
        });
      }
    }
  }

  function emitStep(item: StepNode, depth: number): void {
    const isOpen = expanded.has(item.id);
    const kind = (item.tactic["kind"] as string | undefined) ?? "?";
    rows.push({
      id: item.id,
      depth,
      kind: "step",
      text: `${item.term}  [${kind}]  (#${item.id})`,
      collapsible: item.detail.length > 0,
      expanded: isOpen,
    });
    if (isOpen) {
      for (const d of item.detail) emitItem(d, depth + 1);
    }
  }

  function emitItem(item: CalcNode, depth: number): void {
    if (item.kind === "problem") emitBlock(item, depth);
    else emitStep(item, depth);
  }

  emitBlock(tree as ProblemNode, 0);
  return rows;
}

/** Render rows to the exact text the service's `view` endpoint produces. */
export function rowsToText(rows: OutlineRow[]): string {
  return rows.map((r) => "  ".repeat(r.depth) + r.text).join("\n");
}

export function toggle(expanded: ReadonlySet<number>, id: number): Set<number> {
  const next = new Set(expanded);
  if (next.has(id)) next.delete(id);
  else next.add(id);
  return next;
}

/** Ids of every collapsible node, for expand-all. */
export function allNodeIds(tree: CalcNode): number[] {
  const ids: number[] = [];
  function walk(n: CalcNode): void {
    ids.push(n.id);
    const children = n.kind === "problem" ? n.items : n.detail;
    for (const c of children) walk(c);
  }
  walk(tree);
  return ids;
}
