import { Frame } from "./frames";

export type Box = [number, number, number, number]; // x, y, w, h

/** floor(v + 0.5): matches the engine's reference tracker rounding. */
export function iround(v: number): number {
  return Math.floor(v + 0.5);
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

interface Template {
  w: number;
  h: number;
  values: Float64Array; // zero-mean, row-major RGB
  norm: number;
}

function cropTemplate(frame: Frame, box: Box): Template {
  const x = iround(box[0]);
  const y = iround(box[1]);
  const w = iround(box[2]);
  const h = iround(box[3]);
  const vals = new Float64Array(w * h * 3);
  let sum = 0;
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      for (let ch = 0; ch < 3; ch++) {
        const v = frame.data[((y + r) * frame.width + (x + c)) * 3 + ch];
        vals[(r * w + c) * 3 + ch] = v;
        sum += v;
      }
    }
  }
  const mean = sum / vals.length;
  let sq = 0;
  for (let i = 0; i < vals.length; i++) {
    vals[i] -= mean;
    sq += vals[i] * vals[i];
  }
  return { w, h, values: vals, norm: Math.sqrt(sq) };
}

/**
 * Best zero-normalized cross-correlation placement of the template within
 * `radius` of the previous top-left corner, clamped into the frame. Ties
 * break to the smallest offset in row-major scan order; a constant
 * template scores 0 at the previous position.
 */
export function nccLocate(
  template: Template,
  frame: Frame,
  prevX: number,
  prevY: number,
  radius: number,
): { x: number; y: number; score: number } {
  const tw = template.w;
  const th = template.h;
  const fw = frame.width;
  const fh = frame.height;
  const px = clamp(iround(prevX), 0, fw - tw);
  const py = clamp(iround(prevY), 0, fh - th);
  if (template.norm === 0) {
    return { x: px, y: py, score: 0 };
  }
  const xLo = clamp(px - radius, 0, fw - tw);
  const xHi = Math.max(clamp(px + radius, 0, fw - tw), xLo);
  const yLo = clamp(py - radius, 0, fh - th);
  const yHi = Math.max(clamp(py + radius, 0, fh - th), yLo);

  let bestX = xLo;
  let bestY = yLo;
  let bestScore = -Infinity;
  const n = tw * th * 3;
  for (let y = yLo; y <= yHi; y++) {
    for (let x = xLo; x <= xHi; x++) {
      let sum = 0;
      for (let r = 0; r < th; r++) {
        const rowBase = ((y + r) * fw + x) * 3;
        for (let i = 0; i < tw * 3; i++) {
          sum += frame.data[rowBase + i];
        }
      }
      const mean = sum / n;
      let num = 0;
      let sq = 0;
      for (let r = 0; r < th; r++) {
        const rowBase = ((y + r) * fw + x) * 3;
        const tBase = r * tw * 3;
        for (let i = 0; i < tw * 3; i++) {
          const wv = frame.data[rowBase + i] - mean;
          num += wv * template.values[tBase + i];
          sq += wv * wv;
        }
      }
      const den = Math.sqrt(sq) * template.norm;
      const score = den > 0 ? num / den : 0;
      if (score > bestScore) {
        bestScore = score;
        bestX = x;
        bestY = y;
      }
    }
  }
  return { x: bestX, y: bestY, score: bestScore };
}

export interface TrackReply {
  boxes: Box[];
  scores: number[];
}

/** Fixed-template ZNCC tracker: the frame-0 crop is never updated. */
export function nccTrack(frames: Frame[], initBox: Box, radius: number): TrackReply {
  const template = cropTemplate(frames[0], initBox);
  const boxes: Box[] = [initBox];
  const scores: number[] = [1.0];
  let prevX = iround(initBox[0]);
  let prevY = iround(initBox[1]);
  for (let i = 1; i < frames.length; i++) {
    const hit = nccLocate(template, frames[i], prevX, prevY, radius);
    boxes.push([hit.x, hit.y, template.w, template.h]);
    scores.push(hit.score);
    prevX = hit.x;
    prevY = hit.y;
  }
  return { boxes, scores };
}

/** Echo tracker: repeats the init box for every frame. */
export function echoTrack(numFrames: number, initBox: Box): TrackReply {
  const boxes: Box[] = [];
  const scores: number[] = [];
  for (let i = 0; i < numFrames; i++) {
    boxes.push(initBox);
    scores.push(1.0);
  }
  return { boxes, scores };
}
