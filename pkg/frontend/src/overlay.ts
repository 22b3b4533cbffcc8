/** Pure pixel operations for the mask overlay layer.
 *
 * The overlay is an RGBA buffer the size of the image: foreground pixels get
 * a translucent tint (optionally just their boundary), everything else is
 * fully transparent. Updates can be restricted to a box so a click only
 * repaints the region the server says changed.
 */

export interface MaskBitmap {
  width: number;
  height: number;
  /** one byte per pixel, 0 = background, 255 = foreground */
  data: Uint8Array;
}

export interface Region {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export const MASK_TINT: [number, number, number] = [66, 133, 244];

export function emptyMask(width: number, height: number): MaskBitmap {
  return { width, height, data: new Uint8Array(width * height) };
}

export function cloneMask(mask: MaskBitmap): MaskBitmap {
  return { width: mask.width, height: mask.height, data: new Uint8Array(mask.data) };
}

export function clampRegion(region: Region, width: number, height: number): Region {
  return {
    x0: Math.max(0, Math.floor(region.x0)),
    y0: Math.max(0, Math.floor(region.y0)),
    x1: Math.min(width, Math.ceil(region.x1)),
    y1: Math.min(height, Math.ceil(region.y1)),
  };
}

/** Copy `src` into `dest`, but only inside `region`. */
export function copyMaskRegion(dest: MaskBitmap, src: MaskBitmap, region: Region): void {
  if (dest.width !== src.width || dest.height !== src.height) {
    throw new Error(`mask size mismatch: ${dest.width}x${dest.height} vs ${src.width}x${src.height}`);
  }
  const r = clampRegion(region, dest.width, dest.height);
  for (let y = r.y0; y < r.y1; y++) {
    const row = y * dest.width;
    dest.data.set(src.data.subarray(row + r.x0, row + r.x1), row + r.x0);
  }
}

function isBoundary(mask: MaskBitmap, x: number, y: number): boolean {
  const { width, height, data } = mask;
  if (data[y * width + x] === 0) return false;
  if (x === 0 || y === 0 || x === width - 1 || y === height - 1) return true;
  return (
    data[y * width + x - 1] === 0 ||
    data[y * width + x + 1] === 0 ||
    data[(y - 1) * width + x] === 0 ||
    data[(y + 1) * width + x] === 0
  );
}

export interface OverlayStyle {
  opacity: number; // 0..1 for the filled tint
  outline: boolean; // draw only the 1px mask boundary (full alpha)
  tint?: [number, number, number];
}

/** Repaint the RGBA overlay buffer inside `region` from the mask. */
export function paintOverlayRegion(
  overlay: Uint8ClampedArray,
  mask: MaskBitmap,
  region: Region,
  style: OverlayStyle,
): void {
  const [tr, tg, tb] = style.tint ?? MASK_TINT;
  const alpha = Math.round(255 * Math.min(1, Math.max(0, style.opacity)));
  const r = clampRegion(region, mask.width, mask.height);
  for (let y = r.y0; y < r.y1; y++) {
    for (let x = r.x0; x < r.x1; x++) {
      const px = (y * mask.width + x) * 4;
      const on = mask.data[y * mask.width + x] !== 0;
      let a = 0;
      if (on) {
        if (style.outline) {
          a = isBoundary(mask, x, y) ? 255 : 0;
        } else {
          a = alpha;
        }
      }
      overlay[px] = tr;
      overlay[px + 1] = tg;
      overlay[px + 2] = tb;
      overlay[px + 3] = a;
    }
  }
}

export function paintOverlay(overlay: Uint8ClampedArray, mask: MaskBitmap, style: OverlayStyle): void {
  paintOverlayRegion(overlay, mask, { x0: 0, y0: 0, x1: mask.width, y1: mask.height }, style);
}

export function newOverlay(width: number, height: number): Uint8ClampedArray {
  return new Uint8ClampedArray(width * height * 4);
}
