/**
 * View state for the 3D photo viewer.
 *
 * The state is a pure function of the cumulative inputs (total scroll,
 * total pointer offset), so there is no drift: scrolling down and back up
 * by the same amount restores the exact initial state, and any closed
 * pointer path returns to where it started.
 *
 * Scroll drives vertical rotation and dolly, plus a small amount of
 * horizontal rotation; pointer motion substitutes for gyro rotation.
 * Angles clamp to configured limits and the model fades out smoothly as
 * the view approaches them.
 */

export interface ViewLimits {
  /** maximum |yaw| in degrees */
  yawDeg: number;
  /** maximum |pitch| in degrees */
  pitchDeg: number;
  /** maximum |dolly| in scene units */
  dolly: number;
  /** fraction of the limit where fading begins (1 = never fade early) */
  comfort: number;
}

export interface ViewGains {
  /** pitch degrees per scroll unit */
  scrollPitch: number;
  /** dolly scene units per scroll unit */
  scrollDolly: number;
  /** yaw degrees per scroll unit; much smaller than scrollPitch */
  scrollYaw: number;
  /** yaw degrees per pointer x unit */
  pointerYaw: number;
  /** pitch degrees per pointer y unit */
  pointerPitch: number;
}

export interface ViewState {
  pitchDeg: number;
  yawDeg: number;
  dolly: number;
  /** 1 inside the comfort region, smoothly 0 at the limits */
  fade: number;
}

export const DEFAULT_LIMITS: ViewLimits = {
  yawDeg: 10,
  pitchDeg: 10,
  dolly: 0.15, // ~5% of a typical mean scene depth of 3 units
  comfort: 0.7,
};

export const DEFAULT_GAINS: ViewGains = {
  scrollPitch: 0.02,
  scrollDolly: 0.0004,
  scrollYaw: 0.004, // a small bit of horizontal rotation
  pointerYaw: 0.05,
  pointerPitch: 0.05,
};

export function clamp(v: number, lo: number, hi: number): number {
  return v < lo ? lo : v > hi ? hi : v;
}

function smoothstep(t: number): number {
  const x = clamp(t, 0, 1);
  return x * x * (3 - 2 * x);
}

/** Per-axis fade: 1 inside comfort * limit, smooth 0 at +-limit. */
export function axisFade(value: number, limit: number, comfort: number): number {
  if (limit <= 0) return 1;
  const a = Math.abs(value);
  const start = comfort * limit;
  if (a <= start) return 1;
  if (a >= limit) return 0;
  return 1 - smoothstep((a - start) / (limit - start));
}

/**
 * Accumulates raw input and derives the clamped, faded view state.
 * Mappings are linear in the cumulative totals, hence path independent.
 */
export class ViewControl {
  scrollTotal = 0;
  pointerX = 0;
  pointerY = 0;

  constructor(
    public limits: ViewLimits = { ...DEFAULT_LIMITS },
    public gains: ViewGains = { ...DEFAULT_GAINS },
  ) {}

  applyScroll(delta: number): ViewState {
    this.scrollTotal += delta;
    return this.state();
  }

  applyPointer(dx: number, dy: number): ViewState {
    this.pointerX += dx;
    this.pointerY += dy;
    return this.state();
  }

  reset(): void {
    this.scrollTotal = 0;
    this.pointerX = 0;
    this.pointerY = 0;
  }

  state(): ViewState {
    const g = this.gains;
    const l = this.limits;
    const pitchRaw = g.scrollPitch * this.scrollTotal + g.pointerPitch * this.pointerY;
    const yawRaw = g.scrollYaw * this.scrollTotal + g.pointerYaw * this.pointerX;
    const dollyRaw = g.scrollDolly * this.scrollTotal;
    const fade = Math.min(
      axisFade(pitchRaw, l.pitchDeg, l.comfort),
      axisFade(yawRaw, l.yawDeg, l.comfort),
      axisFade(dollyRaw, l.dolly, l.comfort),
    );
    return {
      pitchDeg: clamp(pitchRaw, -l.pitchDeg, l.pitchDeg),
      yawDeg: clamp(yawRaw, -l.yawDeg, l.yawDeg),
      dolly: clamp(dollyRaw, -l.dolly, l.dolly),
      fade,
    };
  }
}

/** Camera pose for a view state: orbit offset around the scene pivot. */
export function cameraOffset(
  state: ViewState,
  pivotDistance: number,
): { x: number; y: number; z: number } {
  const yaw = (state.yawDeg * Math.PI) / 180;
  const pitch = (state.pitchDeg * Math.PI) / 180;
  const r = pivotDistance + state.dolly;
  return {
    x: r * Math.sin(yaw) * Math.cos(pitch),
    y: r * Math.sin(pitch),
    z: r * Math.cos(yaw) * Math.cos(pitch) - pivotDistance,
  };
}

/**
 * Project a scene point to normalized screen coordinates for a camera at
 * ``offset`` looking toward the pivot (small-angle viewer model; matches
 * the render camera for the motions the viewer allows).
 */
export function projectPoint(
  point: { x: number; y: number; z: number },
  offset: { x: number; y: number; z: number },
  focal = 1.0,
): { x: number; y: number } {
  const dx = point.x - offset.x;
  const dy = point.y - offset.y;
  const dz = point.z - offset.z; // camera looks down -z
  return { x: (focal * dx) / -dz, y: (focal * dy) / -dz };
}
