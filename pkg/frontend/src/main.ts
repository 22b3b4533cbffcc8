/** DOM wiring: three stacked canvases (image, mask overlay, markers) plus a toolbar. */

import { ApiClient } from "./api.js";
import { MaskBitmap, Region } from "./overlay.js";
import { AnnotatorView, MARKER_COLORS, buttonPolarity, screenToImage } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function decodeMaskBrowser(png: ArrayBuffer): Promise<MaskBitmap> {
  const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const pixels = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const data = new Uint8Array(bitmap.width * bitmap.height);
  for (let i = 0; i < data.length; i++) {
    data[i] = pixels[i * 4] >= 128 ? 255 : 0;
  }
  return { width: bitmap.width, height: bitmap.height, data };
}

async function fileBytes(input: HTMLInputElement): Promise<ArrayBuffer | null> {
  const file = input.files?.[0];
  return file ? file.arrayBuffer() : null;
}

function download(bytes: ArrayBuffer, name: string): void {
  const url = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
  const a = document.createElement("a");
  a.href = url;
  a.download = name;
  a.click();
  URL.revokeObjectURL(url);
}

function main(): void {
  const imageCanvas = el<HTMLCanvasElement>("image-layer");
  const overlayCanvas = el<HTMLCanvasElement>("overlay-layer");
  const markerCanvas = el<HTMLCanvasElement>("marker-layer");
  const status = el<HTMLSpanElement>("status");

  const api = new ApiClient("");
  const view = new AnnotatorView(api, decodeMaskBrowser, {
    onStatus: (text) => (status.textContent = text),
    onOverlayChanged: (region) => repaintOverlay(region),
    onMarkersChanged: () => repaintMarkers(),
  });

  function repaintOverlay(region: Region | null): void {
    const ctx = overlayCanvas.getContext("2d")!;
    const data = new ImageData(new Uint8ClampedArray(view.overlay), view.width, view.height);
    if (region) {
      ctx.putImageData(data, 0, 0, region.x0, region.y0, region.x1 - region.x0, region.y1 - region.y0);
    } else {
      ctx.putImageData(data, 0, 0);
    }
  }

  function repaintMarkers(): void {
    const ctx = markerCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, markerCanvas.width, markerCanvas.height);
    for (const marker of view.markers) {
      ctx.beginPath();
      ctx.arc(marker.x + 0.5, marker.y + 0.5, 4, 0, 2 * Math.PI);
      ctx.fillStyle = MARKER_COLORS[marker.polarity];
      ctx.fill();
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }

  async function openSession(): Promise<void> {
    const image = await fileBytes(el<HTMLInputElement>("image-file"));
    if (!image) {
      status.textContent = "choose an image first";
      return;
    }
    const initMask = await fileBytes(el<HTMLInputElement>("init-mask-file"));
    const gtMask = await fileBytes(el<HTMLInputElement>("gt-mask-file"));
    const backend = el<HTMLSelectElement>("backend").value;
    const series = el<HTMLSelectElement>("series").value;
    try {
      await view.openSession(image, {
        backend,
        series,
        initMask: initMask ?? undefined,
        gtMask: gtMask ?? undefined,
      });
    } catch (err) {
      status.textContent = `error: ${(err as Error).message}`;
      return;
    }
    const bitmap = await createImageBitmap(new Blob([image]));
    for (const canvas of [imageCanvas, overlayCanvas, markerCanvas]) {
      canvas.width = view.width;
      canvas.height = view.height;
    }
    imageCanvas.getContext("2d")!.drawImage(bitmap, 0, 0);
    repaintOverlay(null);
    repaintMarkers();
  }

  markerCanvas.addEventListener("contextmenu", (event) => event.preventDefault());
  markerCanvas.addEventListener("mousedown", (event) => {
    const rect = markerCanvas.getBoundingClientRect();
    const point = screenToImage(
      event.clientX - rect.left,
      event.clientY - rect.top,
      rect.width,
      rect.height,
      view.width,
      view.height,
    );
    if (!point) return;
    void view
      .placeClick(point.x, point.y, buttonPolarity(event.button, event.shiftKey))
      .catch((err) => (status.textContent = `error: ${(err as Error).message}`));
  });

  el<HTMLButtonElement>("open").addEventListener("click", () => void openSession());
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    void view.undo().catch((err) => (status.textContent = `error: ${(err as Error).message}`));
  });
  el<HTMLButtonElement>("export").addEventListener("click", () => {
    void view.exportMask().then((bytes) => download(bytes, "mask.png"));
  });
  el<HTMLInputElement>("load-mask").addEventListener("change", async (event) => {
    const bytes = await fileBytes(event.target as HTMLInputElement);
    if (bytes) {
      await view.loadInitialMask(bytes).catch((err) => (status.textContent = `error: ${(err as Error).message}`));
    }
  });
  el<HTMLInputElement>("opacity").addEventListener("input", (event) => {
    view.setOverlayStyle({ opacity: Number((event.target as HTMLInputElement).value) / 100 });
  });
  el<HTMLInputElement>("outline").addEventListener("change", (event) => {
    view.setOverlayStyle({ outline: (event.target as HTMLInputElement).checked });
  });
}

main();
