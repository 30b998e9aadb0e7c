// Click-drag on the scene becomes a velocity impulse on the model's
// degrees of freedom. The mapping is per task family because the joints
// mean different things: a planar force for the particle, a sideways
// shove for the pendulum family.

import { sceneKind } from "./scene.js";

/** Gain from world-units of drag to velocity impulse. */
const DRAG_GAIN = 6.0;
const MAX_IMPULSE = 12.0;

function clampMagnitude(v: number[], cap: number): number[] {
  const mag = Math.hypot(...v);
  if (mag <= cap || mag === 0) return v;
  return v.map((x) => (x * cap) / mag);
}

/**
 * Convert a drag in canvas pixels into an impulse vector of length nv.
 *
 * dxPx grows rightward, dyPx grows downward (canvas convention);
 * pxPerUnit is the scene's world scale so the gesture feels the same at
 * any canvas size.
 */
export function impulseFromDrag(
  task: string,
  nv: number,
  dxPx: number,
  dyPx: number,
  pxPerUnit: number,
): number[] {
  const gx = (dxPx / pxPerUnit) * DRAG_GAIN;
  const gy = ((0 - dyPx) / pxPerUnit) * DRAG_GAIN; // world y grows upward
  const kind = sceneKind(task);
  let impulse: number[];
  switch (kind) {
    case "particle":
      impulse = [gx, gy];
      break;
    case "pendulum":
      // horizontal shove on the bob, like flicking it sideways
      impulse = [gx];
      break;
    case "cartpole":
      // push the cart; the pole reacts through the dynamics
      impulse = [gx, 0];
      break;
    case "acrobot":
      // shove the whole chain at the shoulder
      impulse = [gx, 0];
      break;
    default:
      impulse = new Array(nv).fill(0);
      impulse[0] = gx;
      break;
  }
  while (impulse.length < nv) impulse.push(0);
  impulse = impulse.slice(0, nv);
  return clampMagnitude(impulse, MAX_IMPULSE);
}
