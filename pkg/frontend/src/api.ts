/** Typed client for the session service. All math happens server-side;
 * this module only moves JSON. */

import { z } from "zod";

export interface StepNode {
  kind: "step";
  id: number;
  term: string;
  tactic: Record<string, unknown>;
  detail: CalcNode[];
}

export interface ProblemNode {
  kind: "problem";
  id: number;
  theory: string;
  problem: string[];
  method: string[];
  statement: string;
  model: Record<string, string[]> | null;
  env_args: Record<string, string>;
  items: CalcNode[];
  result: string | null;
  postcond: boolean | null;
}

export type CalcNode = StepNode | ProblemNode;

const StepNodeSchema: z.ZodType<StepNode> = z.object({
  kind: z.literal("step"),
  id: z.number(),
  term: z.string(),
  tactic: z.record(z.string(), z.unknown()),
  detail: z.array(z.lazy(() => CalcNodeSchema)),
});

const ProblemNodeSchema: z.ZodType<ProblemNode> = z.object({
  kind: z.literal("problem"),
  id: z.number(),
  theory: z.string(),
  problem: z.array(z.string()),
  method: z.array(z.string()),
  statement: z.string(),
  model: z.record(z.string(), z.array(z.string())).nullable(),
  env_args: z.record(z.string(), z.string()),
  items: z.array(z.lazy(() => CalcNodeSchema)),
  result: z.string().nullable(),
  postcond: z.boolean().nullable(),
});

export const CalcNodeSchema: z.ZodType<CalcNode> = z.union([
  StepNodeSchema,
  ProblemNodeSchema,
]);

export const TreePayload = z.object({
  phase: z.string(),
  tree: CalcNodeSchema.nullable(),
  view: z.string(),
});
export type TreePayload = z.infer<typeof TreePayload>;

export const ModelFeedback = z.object({
  items: z.array(
    z.object({
      field: z.string(),
      term: z.string().nullable(),
      verdict: z.string(),
    }),
  ),
  complete: z.boolean(),
  phase: z.string(),
});
export type ModelFeedback = z.infer<typeof ModelFeedback>;

export const RefsFeedback = z.object({
  verdicts: z.record(z.string(), z.string()),
  complete: z.boolean(),
  phase: z.string(),
  suggestion: z.array(z.string()).optional(),
});
export type RefsFeedback = z.infer<typeof RefsFeedback>;

export const StepResponse = z.object({
  accepted: z.boolean(),
  item: CalcNodeSchema.nullable(),
  reason: z.string(),
  error_pattern: z
    .object({ id: z.string(), feedback: z.string() })
    .nullable(),
  done: z.boolean(),
  phase: z.string(),
});
export type StepResponse = z.infer<typeof StepResponse>;

export const NextResponse = z.object({
  granted: z.boolean(),
  action: z.record(z.string(), z.unknown()),
  tactic: z.record(z.string(), z.unknown()).optional(),
  item: CalcNodeSchema.optional(),
  done: z.boolean().optional(),
  phase: z.string(),
});
export type NextResponse = z.infer<typeof NextResponse>;

export const Definition = z.object({
  kind: z.string(),
  name: z.string(),
  theory: z.string(),
  formal: z.string().nullable().optional(),
  explanation: z.string().nullable().optional(),
});
export type Definition = z.infer<typeof Definition>;

/** A non-2xx response; carries the service's {error, detail} body. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    public detail: string,
  ) {
    super(`${error}: ${detail}`);
  }
}

async function unwrap(res: Response): Promise<unknown> {
  const body: unknown = await res.json().catch(() => ({}));
  if (!res.ok) {
    const b = body as { error?: string; detail?: string };
    throw new ApiError(res.status, b.error ?? `HTTP ${res.status}`, b.detail ?? "");
  }
  return body;
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async get(path: string): Promise<unknown> {
    return unwrap(await this.fetchFn(this.baseUrl + path));
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    return unwrap(
      await this.fetchFn(this.baseUrl + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async createSession(instanceId: string, mode: string): Promise<string> {
    const body = await this.post("/sessions", {
      instance_id: instanceId,
      mode,
    });
    return z.object({ session_id: z.string() }).parse(body).session_id;
  }

  async tree(sid: string, expand: Iterable<number> = []): Promise<TreePayload> {
    const ids = Array.from(expand).join(",");
    const q = ids ? `?expand=${encodeURIComponent(ids)}` : "";
    return TreePayload.parse(await this.get(`/sessions/${sid}/tree${q}`));
  }

  async model(sid: string, field: string, term: string): Promise<ModelFeedback> {
    return ModelFeedback.parse(
      await this.post(`/sessions/${sid}/model`, { field, term }),
    );
  }

  async refs(
    sid: string,
    refs: { theory?: string; problem?: string[]; method?: string[] },
  ): Promise<RefsFeedback> {
    return RefsFeedback.parse(await this.post(`/sessions/${sid}/refs`, refs));
  }

  async stepTerm(sid: string, term: string): Promise<StepResponse> {
    return StepResponse.parse(await this.post(`/sessions/${sid}/step`, { term }));
  }

  async stepTactic(sid: string, tactic: string): Promise<StepResponse> {
    return StepResponse.parse(
      await this.post(`/sessions/${sid}/step`, { tactic }),
    );
  }

  async next(sid: string): Promise<NextResponse> {
    return NextResponse.parse(await this.post(`/sessions/${sid}/next`, {}));
  }

  /** null when the symbol has no definition (plain-text rendering). */
  async definition(key: string): Promise<Definition | null> {
    try {
      return Definition.parse(
        await this.get(`/kb/definitions/${encodeURIComponent(key)}`),
      );
    } catch (e) {
      if (e instanceof ApiError && e.status === 404) return null;
      throw e;
    }
  }

  async prereq(problems: string[]): Promise<{ kind: string; key: unknown }[]> {
    const body = await this.get(
      `/kb/prereq?problems=${encodeURIComponent(problems.join(","))}`,
    );
    return z
      .object({
        closure: z.array(z.object({ kind: z.string(), key: z.unknown() })),
      })
      .parse(body).closure;
  }
}
