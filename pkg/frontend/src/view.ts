/** The annotator's state machine, kept free of DOM so it can be tested headless.
 *
 * One session, one mask, one in-flight request at a time: clicks arriving
 * while a request is pending are ignored (and counted, so the UI can show an
 * indicator). After every server round trip the overlay is repainted only
 * inside the server-reported updated region.
 */

import { ApiClient, ClickResponse, Polarity, SessionOptions } from "./api.js";
import {
  MaskBitmap,
  OverlayStyle,
  Region,
  clampRegion,
  copyMaskRegion,
  emptyMask,
  newOverlay,
  paintOverlay,
  paintOverlayRegion,
} from "./overlay.js";

export type MaskDecoder = (png: ArrayBuffer) => Promise<MaskBitmap>;

export interface Marker {
  x: number;
  y: number;
  polarity: Polarity;
}

/** Marker colors: positive clicks are red, negative clicks are green. */
export const MARKER_COLORS: Record<Polarity, string> = {
  positive: "#e53935",
  negative: "#43a047",
};

export interface ClickOutcome {
  response: ClickResponse;
  repainted: Region | null;
  roundTripMs: number;
}

export interface ViewEvents {
  onOverlayChanged?: (region: Region | null) => void;
  onMarkersChanged?: (markers: Marker[]) => void;
  onStatus?: (text: string) => void;
}

/** Map a point in the displayed element's coordinates to integer image pixels. */
export function screenToImage(
  px: number,
  py: number,
  displayWidth: number,
  displayHeight: number,
  imageWidth: number,
  imageHeight: number,
): { x: number; y: number } | null {
  if (displayWidth <= 0 || displayHeight <= 0) return null;
  const x = Math.floor((px / displayWidth) * imageWidth);
  const y = Math.floor((py / displayHeight) * imageHeight);
  if (x < 0 || y < 0 || x >= imageWidth || y >= imageHeight) return null;
  return { x, y };
}

export function buttonPolarity(button: number, shiftKey = false): Polarity {
  // left button = positive; right button (or shift-left) = negative
  return button === 2 || shiftKey ? "negative" : "positive";
}

export class AnnotatorView {
  sessionId: string | null = null;
  width = 0;
  height = 0;
  mask: MaskBitmap = emptyMask(1, 1);
  overlay: Uint8ClampedArray = newOverlay(1, 1);
  markers: Marker[] = [];
  progressive = false;
  inFlight = false;
  ignoredWhileBusy = 0;
  lastIou: number | undefined;
  lastMaskPng: ArrayBuffer | null = null;
  style: OverlayStyle = { opacity: 0.45, outline: false };

  constructor(
    private api: ApiClient,
    private decodeMask: MaskDecoder,
    private events: ViewEvents = {},
  ) {}

  async openSession(image: ArrayBuffer | Uint8Array, opts: SessionOptions = {}): Promise<void> {
    const info = await this.api.createSession(image, opts);
    this.sessionId = info.id;
    this.width = info.width;
    this.height = info.height;
    this.mask = emptyMask(info.width, info.height);
    this.overlay = newOverlay(info.width, info.height);
    this.markers = [];
    this.progressive = Boolean(opts.initMask);
    this.ignoredWhileBusy = 0;
    this.lastIou = undefined;
    this.lastMaskPng = null;
    if (opts.initMask) {
      await this.refreshMask(null); // full repaint of the provided mask
    } else {
      paintOverlay(this.overlay, this.mask, this.style);
      this.events.onOverlayChanged?.(null);
    }
    this.events.onStatus?.(`session ${info.id.slice(0, 8)} (${info.width}x${info.height})`);
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error("no active session");
    return this.sessionId;
  }

  /** Fetch the current mask; repaint inside `region`, or everywhere when null. */
  private async refreshMask(region: Region | null): Promise<Region | null> {
    const sid = this.requireSession();
    const png = await this.api.getMask(sid);
    this.lastMaskPng = png;
    const fresh = await this.decodeMask(png);
    if (fresh.width !== this.width || fresh.height !== this.height) {
      throw new Error(`mask ${fresh.width}x${fresh.height} does not match image ${this.width}x${this.height}`);
    }
    if (region === null) {
      this.mask = fresh;
      paintOverlay(this.overlay, this.mask, this.style);
      this.events.onOverlayChanged?.(null);
      return null;
    }
    const clamped = clampRegion(region, this.width, this.height);
    copyMaskRegion(this.mask, fresh, clamped);
    paintOverlayRegion(this.overlay, this.mask, clamped, this.style);
    this.events.onOverlayChanged?.(clamped);
    return clamped;
  }

  async placeClick(x: number, y: number, polarity: Polarity): Promise<ClickOutcome | "busy" | "out-of-bounds"> {
    const sid = this.requireSession();
    if (this.inFlight) {
      this.ignoredWhileBusy += 1;
      this.events.onStatus?.(`busy; ignored click (${this.ignoredWhileBusy})`);
      return "busy";
    }
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) {
      return "out-of-bounds";
    }
    this.inFlight = true;
    const started = Date.now();
    try {
      const response = await this.api.click(sid, x, y, polarity);
      this.progressive = response.progressive;
      this.lastIou = response.iou;
      this.markers.push({ x, y, polarity });
      this.events.onMarkersChanged?.(this.markers);
      let repainted: Region | null = null;
      if (response.updated_region) {
        const [x0, y0, x1, y1] = response.updated_region;
        repainted = await this.refreshMask({ x0, y0, x1, y1 });
      }
      const roundTripMs = Date.now() - started;
      this.events.onStatus?.(
        `click #${response.click_index} ${polarity} (${roundTripMs} ms` +
          (response.iou !== undefined ? `, IOU ${response.iou.toFixed(4)}` : "") +
          `)${response.progressive ? " [progressive]" : ""}`,
      );
      return { response, repainted, roundTripMs };
    } finally {
      this.inFlight = false;
    }
  }

  async loadInitialMask(png: ArrayBuffer | Uint8Array): Promise<void> {
    const sid = this.requireSession();
    await this.api.putMask(sid, png);
    this.progressive = true;
    await this.refreshMask(null);
    this.events.onStatus?.("mask loaded; progressive merging on");
  }

  async undo(): Promise<void> {
    const sid = this.requireSession();
    await this.api.undo(sid);
    if (this.markers.length > 0) {
      this.markers.pop();
      this.events.onMarkersChanged?.(this.markers);
    }
    await this.refreshMask(null);
    this.events.onStatus?.("undone");
  }

  /** PNG bytes of the mask as last fetched from the server. */
  async exportMask(): Promise<ArrayBuffer> {
    if (this.lastMaskPng) return this.lastMaskPng;
    const sid = this.requireSession();
    const png = await this.api.getMask(sid);
    this.lastMaskPng = png;
    return png;
  }

  setOverlayStyle(style: Partial<OverlayStyle>): void {
    this.style = { ...this.style, ...style };
    paintOverlay(this.overlay, this.mask, this.style);
    this.events.onOverlayChanged?.(null);
  }
}
