/** Screen state for one session, driven exclusively by service responses.
 *
 * The view model holds no mathematical state of its own: every mutation is
 * one API call, and the outline is re-fetched from the service afterwards.
 * Reconstructing a view model from a stored session id therefore reproduces
 * the exact outline the user last saw. */

import {
  ApiClient,
  ApiError,
  type CalcNode,
  type Definition,
  type ModelFeedback,
  type RefsFeedback,
} from "./api.js";
import { flattenOutline, toggle, type OutlineRow } from "./outline.js";

export interface DefinitionPanel {
  symbol: string;
  definition: Definition | null;
}

export class SessionViewModel {
  sessionId = "";
  phase = "model";
  tree: CalcNode | null = null;
  viewText = "";
  expanded: Set<number> = new Set();

  modelFeedback: ModelFeedback | null = null;
  refsFeedback: RefsFeedback | null = null;

  /** Inline error/rejection/dialogue message, cleared by the next action. */
  message = "";
  errorPattern: { id: string; feedback: string } | null = null;
  /** Set when the dialogue policy asks the learner to act instead. */
  counterRequest: string | null = null;
  done = false;

  panel: DefinitionPanel | null = null;
  private definitions = new Map<string, Definition | null>();

  constructor(private api: ApiClient) {}

  get outlineRows(): OutlineRow[] {
    return this.tree === null ? [] : flattenOutline(this.tree, this.expanded);
  }

  async start(instanceId: string, mode: string): Promise<void> {
    this.sessionId = await this.api.createSession(instanceId, mode);
    await this.refresh();
  }

  /** Attach to an existing session, e.g. after a page reload. */
  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const payload = await this.api.tree(this.sessionId, this.expanded);
    this.phase = payload.phase;
    this.tree = payload.tree;
    this.viewText = payload.view;
    this.done = payload.phase === "done";
  }

  private async guarded(fn: () => Promise<void>): Promise<void> {
    this.message = "";
    this.errorPattern = null;
    this.counterRequest = null;
    try {
      await fn();
    } catch (e) {
      if (e instanceof ApiError) {
        this.message = e.detail ? `${e.error}: ${e.detail}` : e.error;
        return;
      }
      throw e;
    }
  }

  async submitModelItem(field: string, term: string): Promise<void> {
    await this.guarded(async () => {
      this.modelFeedback = await this.api.model(this.sessionId, field, term);
      this.phase = this.modelFeedback.phase;
      await this.refresh();
    });
  }

  async submitRefs(refs: {
    theory?: string;
    problem?: string[];
    method?: string[];
  }): Promise<void> {
    await this.guarded(async () => {
      this.refsFeedback = await this.api.refs(this.sessionId, refs);
      this.phase = this.refsFeedback.phase;
      await this.refresh();
    });
  }

  async requestNext(): Promise<void> {
    await this.guarded(async () => {
      const res = await this.api.next(this.sessionId);
      if (!res.granted) {
        const action = res.action as { kind?: string; demand?: string };
        this.counterRequest = action.demand ?? action.kind ?? "denied";
        this.message = "Try the next step yourself.";
      }
      await this.refresh();
    });
  }

  async submitTerm(term: string): Promise<void> {
    await this.guarded(async () => {
      const res = await this.api.stepTerm(this.sessionId, term);
      if (!res.accepted) {
        this.message = res.reason || "rejected";
        this.errorPattern = res.error_pattern;
      }
      await this.refresh();
    });
  }

  async toggleNode(id: number): Promise<void> {
    this.expanded = toggle(this.expanded, id);
    await this.refresh();
  }

  /** Click-to-definition; caches lookups, null means plain text. */
  async openDefinition(symbol: string): Promise<void> {
    if (!this.definitions.has(symbol)) {
      this.definitions.set(symbol, await this.api.definition(symbol));
    }
    this.panel = { symbol, definition: this.definitions.get(symbol) ?? null };
  }

  closePanel(): void {
    this.panel = null;
  }
}
