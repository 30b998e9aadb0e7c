// Rolling plot storage keyed by simulation time.

/** One scalar series over sim time, trimmed to a fixed trailing window. */
export class SeriesBuffer {
  times: number[] = [];
  values: number[] = [];

  constructor(readonly windowSeconds = 10) {}

  /**
   * Append a sample. Time moving backwards means the episode was reset,
   * so the history no longer describes the current episode and is dropped.
   */
  push(t: number, v: number): void {
    const last = this.times[this.times.length - 1];
    if (last !== undefined && t < last) {
      this.clear();
    }
    this.times.push(t);
    this.values.push(Number.isFinite(v) ? v : NaN);
    const cutoff = t - this.windowSeconds;
    let drop = 0;
    while (drop < this.times.length && this.times[drop] < cutoff) drop++;
    if (drop > 0) {
      this.times.splice(0, drop);
      this.values.splice(0, drop);
    }
  }

  clear(): void {
    this.times.length = 0;
    this.values.length = 0;
  }

  get length(): number {
    return this.times.length;
  }

  /** [min, max] over finite values; null when nothing finite is stored. */
  valueRange(): [number, number] | null {
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of this.values) {
      if (Number.isFinite(v)) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    return lo <= hi ? [lo, hi] : null;
  }
}

/** A named bundle of series sharing one window, e.g. all cost terms. */
export class TraceSet {
  readonly series = new Map<string, SeriesBuffer>();

  constructor(readonly windowSeconds = 10) {}

  push(name: string, t: number, v: number): void {
    let buf = this.series.get(name);
    if (!buf) {
      buf = new SeriesBuffer(this.windowSeconds);
      this.series.set(name, buf);
    }
    buf.push(t, v);
  }

  clear(): void {
    this.series.clear();
  }

  names(): string[] {
    return [...this.series.keys()];
  }

  /** Combined [min, max] across all member series. */
  valueRange(): [number, number] | null {
    let lo = Infinity;
    let hi = -Infinity;
    for (const buf of this.series.values()) {
      const r = buf.valueRange();
      if (r) {
        if (r[0] < lo) lo = r[0];
        if (r[1] > hi) hi = r[1];
      }
    }
    return lo <= hi ? [lo, hi] : null;
  }
}
