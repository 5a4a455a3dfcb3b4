/** Plain-DOM rendering. The whole app re-renders after every view-model
 * action; state lives in the view model, never in the DOM. */

import { isLinkCandidate, tokenize } from "./tokens.js";
import type { SessionViewModel } from "./viewmodel.js";

function el(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function termSpan(vm: SessionViewModel, rerender: () => void, text: string): HTMLElement {
  const wrap = el("span", { class: "term" });
  for (const tok of tokenize(text)) {
    const span = el("span", { class: `token token-${tok.kind}` }, tok.text);
    if (isLinkCandidate(tok)) {
      span.classList.add("linkable");
      span.addEventListener("click", () => {
        void vm.openDefinition(tok.text).then(rerender);
      });
    }
    wrap.append(span);
  }
  return wrap;
}

function modelForm(vm: SessionViewModel, rerender: () => void): HTMLElement {
  const field = el("select", { class: "model-field" }) as HTMLSelectElement;
  for (const f of ["given", "where", "find", "relate"]) {
    field.append(el("option", { value: f }, f));
  }
  const term = el("input", { class: "model-term", placeholder: "item term" }) as HTMLInputElement;
  const submit = el("button", { class: "model-submit" }, "Add item");
  submit.addEventListener("click", () => {
    void vm.submitModelItem(field.value, term.value).then(rerender);
  });
  const feedback = el("ul", { class: "model-feedback" });
  if (vm.modelFeedback !== null) {
    for (const item of vm.modelFeedback.items) {
      feedback.append(
        el(
          "li",
          { class: `verdict-${item.verdict}` },
          `${item.field}: ${item.term ?? "?"} — ${item.verdict}`,
        ),
      );
    }
  }
  return el("section", { class: "model-form" },
    el("h2", {}, "Model"), field, term, submit, feedback);
}

function refsForm(vm: SessionViewModel, rerender: () => void): HTMLElement {
  const theory = el("input", { class: "refs-theory", placeholder: "theory" }) as HTMLInputElement;
  const problem = el("input", { class: "refs-problem", placeholder: "problem a/b" }) as HTMLInputElement;
  const method = el("input", { class: "refs-method", placeholder: "method a/b" }) as HTMLInputElement;
  const submit = el("button", { class: "refs-submit" }, "Set references");
  submit.addEventListener("click", () => {
    const refs: { theory?: string; problem?: string[]; method?: string[] } = {};
    if (theory.value) refs.theory = theory.value;
    if (problem.value) refs.problem = problem.value.split("/");
    if (method.value) refs.method = method.value.split("/");
    void vm.submitRefs(refs).then(rerender);
  });
  const out = el("section", { class: "refs-form" },
    el("h2", {}, "References"), theory, problem, method, submit);
  if (vm.refsFeedback !== null) {
    const verdicts = Object.entries(vm.refsFeedback.verdicts)
      .map(([k, v]) => `${k}: ${v}`)
      .join(", ");
    out.append(el("p", { class: "refs-verdicts" }, verdicts));
    if (vm.refsFeedback.suggestion) {
      out.append(
        el("p", { class: "refs-suggestion" },
          `Did you mean: ${vm.refsFeedback.suggestion.join("/")}?`),
      );
    }
  }
  return out;
}

function outline(vm: SessionViewModel, rerender: () => void): HTMLElement {
  const list = el("ol", { class: "outline" });
  for (const row of vm.outlineRows) {
    const li = el("li", {
      class: `row row-${row.kind}`,
      "data-id": String(row.id),
      style: `margin-left: ${row.depth}em`,
    });
    if (row.collapsible) {
      const ctl = el("button", { class: "collapse" }, row.expanded ? "[-]" : "[+]");
      ctl.addEventListener("click", () => {
        void vm.toggleNode(row.id).then(rerender);
      });
      li.append(ctl, " ");
    }
    li.append(termSpan(vm, rerender, row.text));
    list.append(li);
  }
  return list;
}

function stepControls(vm: SessionViewModel, rerender: () => void): HTMLElement {
  const input = el("input", { class: "step-term", placeholder: "your next term" }) as HTMLInputElement;
  const stepBtn = el("button", { class: "step-submit" }, "Check my step");
  stepBtn.addEventListener("click", () => {
    void vm.submitTerm(input.value).then(rerender);
  });
  const nextBtn = el("button", { class: "next-step" }, "Next step");
  nextBtn.addEventListener("click", () => {
    void vm.requestNext().then(rerender);
  });
  return el("section", { class: "step-controls" }, input, stepBtn, nextBtn);
}

function definitionPanel(vm: SessionViewModel, rerender: () => void): HTMLElement {
  const panel = el("aside", { class: "definition-panel" });
  if (vm.panel === null) return panel;
  const close = el("button", { class: "panel-close" }, "close");
  close.addEventListener("click", () => {
    vm.closePanel();
    rerender();
  });
  panel.append(el("h3", {}, vm.panel.symbol), close);
  const d = vm.panel.definition;
  if (d === null) {
    panel.append(el("p", { class: "no-definition" }, "No definition."));
  } else {
    panel.append(
      el("p", { class: "definition-kind" }, `${d.kind} in ${d.theory}`),
      el("p", { class: "definition-formal" }, d.formal ?? ""),
      el("p", { class: "definition-explanation" }, d.explanation ?? ""),
    );
  }
  return panel;
}

export function renderApp(vm: SessionViewModel, root: HTMLElement): void {
  const rerender = (): void => renderApp(vm, root);
  root.replaceChildren();
  root.append(el("p", { class: "phase" }, `Phase: ${vm.phase}`));
  if (vm.message) {
    root.append(el("p", { class: "message" }, vm.message));
  }
  if (vm.errorPattern !== null) {
    root.append(
      el("p", { class: "error-pattern" },
        `${vm.errorPattern.id}: ${vm.errorPattern.feedback}`),
    );
  }
  if (vm.phase === "model") root.append(modelForm(vm, rerender));
  if (vm.phase === "specify") root.append(refsForm(vm, rerender));
  if (vm.tree !== null) root.append(outline(vm, rerender));
  if (vm.phase === "solve") root.append(stepControls(vm, rerender));
  if (vm.done) root.append(el("p", { class: "done" }, "Finished."));
  root.append(definitionPanel(vm, rerender));
}
