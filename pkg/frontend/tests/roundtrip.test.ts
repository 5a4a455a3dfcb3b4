/** Drive a full Biegelinie session through the view model against the real
 * service: model fields, references, stepping to completion, collapse
 * semantics, click-to-definition, and reload fidelity. */

import { describe, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { allNodeIds, flattenOutline, rowsToText } from "../src/outline.js";
import { SessionViewModel } from "../src/viewmodel.js";
import { BASE_URL } from "./config.js";

const api = () => new ApiClient(BASE_URL);

const BIEGELINIE_MODEL: [string, string][] = [
  ["given", "Traegerlaenge L"],
  ["given", "Streckenlast q_0"],
  ["where", "q_0 ist_integrierbar_auf [0, L]"],
  ["where", "L > 0"],
  ["find", "Biegelinie y"],
  ["relate", "Randbedingungen [Q 0 = q_0 * L, M_b L = 0, y 0 = 0, d/d x (y 0) = 0]"],
];

async function specifyBiegelinie(vm: SessionViewModel): Promise<void> {
  for (const [field, term] of BIEGELINIE_MODEL) {
    await vm.submitModelItem(field, term);
    expect(vm.message).toBe("");
  }
  await vm.submitRefs({
    theory: "Biegelinie",
    problem: ["Baustatik", "Biegelinien"],
    method: ["Biegelinien"],
  });
  expect(vm.phase).toBe("solve");
}

async function solveToEnd(vm: SessionViewModel): Promise<void> {
  for (let i = 0; i < 30 && !vm.done; i++) await vm.requestNext();
  expect(vm.done).toBe(true);
}

describe("Biegelinie round trip", () => {
  test("model form gives per-item feedback and wrong items are flagged", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await vm.submitModelItem("given", "Funktionsterm x");
    const verdicts = new Set(vm.modelFeedback!.items.map((i) => i.verdict));
    expect(verdicts.has("incorrect") || verdicts.has("superfluous")).toBe(true);
    expect(verdicts.has("missing")).toBe(true);

    await vm.submitModelItem("given", "Traegerlaenge L");
    const ok = vm.modelFeedback!.items.find((i) => i.term === "Traegerlaenge L");
    expect(ok!.verdict).toBe("correct");
  });

  test("syntax errors surface as inline messages, not crashes", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await vm.submitModelItem("given", "Traegerlaenge (");
    expect(vm.message).toContain("TermSyntaxError");
  });

  test("a wrong problem reference earns a refine suggestion", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("diff", "explore");
    await vm.submitModelItem("given", "Funktionsterm (x + sin(x ^ 2))");
    await vm.submitModelItem("given", "FunktionsVariable x");
    await vm.submitModelItem("find", "Abgeleitet d_d");
    await vm.submitRefs({ problem: ["Baustatik", "Biegelinien"] });
    expect(vm.refsFeedback!.verdicts["problem"]).toBe("incorrect");
    expect(vm.refsFeedback!.suggestion).toEqual(["Ableitungen"]);
  });

  test("stepping to completion produces the bending line", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await specifyBiegelinie(vm);
    await solveToEnd(vm);
    const root = vm.tree!;
    expect(root.kind).toBe("problem");
    if (root.kind !== "problem") return;
    expect(root.postcond).toBe(true);
    expect(root.result).toBe(
      "y x = -1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3))) + " +
        "(1/24 * (EI ^ -1 * (q_0 * x ^ 4)) + " +
        "1/4 * (EI ^ -1 * (L ^ 2 * (q_0 * x ^ 2))))",
    );
  });

  test("client outline matches the service view for any expansion", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await specifyBiegelinie(vm);
    await solveToEnd(vm);

    // collapsed, fully expanded, and a few partial expansions
    const ids = allNodeIds(vm.tree!);
    const expansions: number[][] = [[], ids, [ids[0]!], ids.slice(0, 3)];
    for (const ex of expansions) {
      vm.expanded = new Set(ex);
      await vm.refresh();
      expect(rowsToText(vm.outlineRows)).toBe(vm.viewText);
    }
  });

  test("collapsing the solution header hides every inner step", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await specifyBiegelinie(vm);
    await solveToEnd(vm);

    const rootId = vm.tree!.id;
    await vm.toggleNode(rootId);
    expect(vm.outlineRows.some((r) => r.kind === "step")).toBe(true);

    await vm.toggleNode(rootId);
    const rows = vm.outlineRows;
    expect(rows.some((r) => r.kind === "step")).toBe(false);
    expect(rows.some((r) => r.kind === "result")).toBe(false);
    expect(rows[0]!.text).toContain("Baustatik/Biegelinien");
  });

  test("constants resolve to definitions, free variables to nothing", async () => {
    const client = api();
    const ei = await client.definition("EI");
    expect(ei).not.toBeNull();
    expect(ei!.kind).toBe("definition");
    expect(ei!.theory).toBe("Biegelinie");

    const plus = await client.definition("+");
    expect(plus).not.toBeNull();

    expect(await client.definition("zzz_not_a_symbol")).toBeNull();
  });

  test("a rule name from a trace resolves to its theorem", async () => {
    const d = await api().definition("diff_sin");
    expect(d).not.toBeNull();
    expect(d!.kind).toBe("theorem");
    expect(d!.formal).toContain("cos");
  });

  test("reload reproduces the identical outline", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "explore");
    await specifyBiegelinie(vm);
    await solveToEnd(vm);

    const reloaded = new SessionViewModel(api());
    await reloaded.resume(vm.sessionId);
    expect(reloaded.phase).toBe(vm.phase);
    expect(reloaded.viewText).toBe(vm.viewText);
    expect(JSON.stringify(reloaded.tree)).toBe(JSON.stringify(vm.tree));
  });

  test("exercise mode rations hints and accepts a typed step", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("biegelinie", "exercise");
    await specifyBiegelinie(vm);
    for (let i = 0; i < 3; i++) {
      await vm.requestNext();
      expect(vm.counterRequest).toBeNull();
    }
    await vm.requestNext();
    expect(vm.counterRequest).toBe("input_term");

    await vm.submitTerm(
      "y x = -1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3))) + " +
        "(1/24 * (EI ^ -1 * (q_0 * x ^ 4)) + " +
        "1/4 * (EI ^ -1 * (L ^ 2 * (q_0 * x ^ 2))))",
    );
    expect(vm.message).toBe("");
    await vm.requestNext();
    expect(vm.counterRequest).toBeNull();
  });

  test("a wrong step is rejected with a reason", async () => {
    const vm = new SessionViewModel(api());
    await vm.start("diff", "explore");
    await vm.submitModelItem("given", "Funktionsterm (x + sin(x ^ 2))");
    await vm.submitModelItem("given", "FunktionsVariable x");
    await vm.submitModelItem("find", "Abgeleitet d_d");
    await vm.submitRefs({
      theory: "Diff",
      problem: ["Ableitungen"],
      method: ["Diff", "differenzieren"],
    });
    await vm.submitTerm("d/d x (x + sin(x ^ 2)) + 1");
    expect(vm.message).toContain("not derivable");

    await vm.submitTerm("1 + 2 * (x * cos(x ^ 2))");
    expect(vm.message).toBe("");
    const steps = flattenOutline(vm.tree!, new Set([vm.tree!.id]));
    expect(steps.some((r) => r.text.includes("[Derived]"))).toBe(true);
  });
});
