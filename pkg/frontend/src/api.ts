/** Typed client for the segmentation service. All mask payloads are PNG bytes. */

export type Polarity = "positive" | "negative";

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
}

export interface ClickResponse {
  mask_url: string;
  updated_region: [number, number, number, number] | null;
  progressive: boolean;
  click_index: number;
  timings_ms: Record<string, number>;
  iou?: number;
}

export interface SessionOptions {
  backend?: string;
  series?: string;
  seed?: number;
  initMask?: ArrayBuffer | Uint8Array;
  gtMask?: ArrayBuffer | Uint8Array;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

function asBlob(data: ArrayBuffer | Uint8Array): Blob {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  // copy into a fresh buffer so Blob never sees a SharedArrayBuffer-backed view
  return new Blob([new Uint8Array(bytes)], { type: "image/png" });
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async createSession(image: ArrayBuffer | Uint8Array, opts: SessionOptions = {}): Promise<SessionInfo> {
    const form = new FormData();
    form.append("image", asBlob(image), "image.png");
    if (opts.initMask) form.append("init_mask", asBlob(opts.initMask), "init_mask.png");
    if (opts.gtMask) form.append("gt_mask", asBlob(opts.gtMask), "gt_mask.png");
    const params = new URLSearchParams();
    if (opts.backend) params.set("backend", opts.backend);
    if (opts.series) params.set("series", opts.series);
    if (opts.seed !== undefined) params.set("seed", String(opts.seed));
    const query = params.size > 0 ? `?${params}` : "";
    const response = await expectOk(
      await fetch(`${this.baseUrl}/sessions${query}`, { method: "POST", body: form }),
    );
    return (await response.json()) as SessionInfo;
  }

  async click(sessionId: string, x: number, y: number, polarity: Polarity): Promise<ClickResponse> {
    const response = await expectOk(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/clicks`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ x, y, polarity }),
      }),
    );
    return (await response.json()) as ClickResponse;
  }

  async getMask(sessionId: string): Promise<ArrayBuffer> {
    const response = await expectOk(await fetch(`${this.baseUrl}/sessions/${sessionId}/mask`));
    return response.arrayBuffer();
  }

  async putMask(sessionId: string, png: ArrayBuffer | Uint8Array): Promise<void> {
    await expectOk(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/mask`, {
        method: "PUT",
        headers: { "content-type": "image/png" },
        body: asBlob(png),
      }),
    );
  }

  async undo(sessionId: string): Promise<void> {
    await expectOk(await fetch(`${this.baseUrl}/sessions/${sessionId}/undo`, { method: "POST" }));
  }
}
