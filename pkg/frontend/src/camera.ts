/** Pan/zoom transform between world meters and canvas pixels.
 *
 * World y points up, canvas y points down; scale is pixels per meter.
 * The transform is kept explicitly invertible so a click can be mapped
 * back to meters with sub-cell error at any zoom level.
 */

export interface Camera {
  scale: number; // pixels per meter
  panX: number; // world meters at the canvas left edge
  panY: number; // world meters at the canvas bottom edge
  canvasW: number;
  canvasH: number;
}

export interface WorldPoint {
  x: number;
  y: number;
}

export interface PixelPoint {
  px: number;
  py: number;
}

export function makeCamera(canvasW: number, canvasH: number, roomW: number, roomH: number): Camera {
  const scale = Math.min(canvasW / roomW, canvasH / roomH);
  return { scale, panX: 0, panY: 0, canvasW, canvasH };
}

export function worldToPixel(cam: Camera, p: WorldPoint): PixelPoint {
  return {
    px: (p.x - cam.panX) * cam.scale,
    py: cam.canvasH - (p.y - cam.panY) * cam.scale,
  };
}

export function pixelToWorld(cam: Camera, p: PixelPoint): WorldPoint {
  return {
    x: p.px / cam.scale + cam.panX,
    y: (cam.canvasH - p.py) / cam.scale + cam.panY,
  };
}

export function panBy(cam: Camera, dxPixels: number, dyPixels: number): Camera {
  return {
    ...cam,
    panX: cam.panX - dxPixels / cam.scale,
    panY: cam.panY + dyPixels / cam.scale,
  };
}

/** Zoom by a factor keeping the world point under the cursor fixed. */
export function zoomAt(cam: Camera, factor: number, cursor: PixelPoint): Camera {
  const anchor = pixelToWorld(cam, cursor);
  const scale = Math.min(Math.max(cam.scale * factor, 5), 5000);
  const zoomed = { ...cam, scale };
  const moved = pixelToWorld(zoomed, cursor);
  return {
    ...zoomed,
    panX: zoomed.panX + (anchor.x - moved.x),
    panY: zoomed.panY + (anchor.y - moved.y),
  };
}
