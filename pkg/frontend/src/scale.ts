export interface Scale {
  toPixel(v: number): number;
  ticks: { value: number; label: string }[];
}

function span(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    // single value: pad so the point sits mid-axis
    lo = lo === 0 ? -1 : lo - Math.abs(lo) * 0.5;
    hi = hi === 0 ? 1 : hi + Math.abs(hi) * 0.5;
  }
  return [lo, hi];
}

export function linearScale(values: number[], pixelLo: number, pixelHi: number): Scale {
  const [lo, hi] = span(values);
  const pad = (hi - lo) * 0.05;
  const a = lo - pad;
  const b = hi + pad;
  const step = niceStep(b - a);
  const ticks = [];
  for (let t = Math.ceil(a / step) * step; t <= b + 1e-12 * step; t += step) {
    const v = Math.abs(t) < step * 1e-9 ? 0 : t;
    ticks.push({ value: v, label: formatTick(v) });
  }
  return {
    toPixel: (v) => pixelLo + ((v - a) / (b - a)) * (pixelHi - pixelLo),
    ticks,
  };
}

export function logScale(values: number[], pixelLo: number, pixelHi: number): Scale {
  for (const v of values) {
    if (v <= 0) {
      throw new Error(`log axis needs positive values, got ${v}`);
    }
  }
  const [lo, hi] = span(values.map(Math.log10));
  const pad = Math.max((hi - lo) * 0.05, 0.05);
  const a = lo - pad;
  const b = hi + pad;
  const ticks = [];
  const stride = Math.max(1, Math.ceil((b - a) / 8));
  for (let e = Math.ceil(a); e <= Math.floor(b); e += stride) {
    ticks.push({ value: Math.pow(10, e), label: `1e${e}` });
  }
  return {
    toPixel: (v) => pixelLo + ((Math.log10(v) - a) / (b - a)) * (pixelHi - pixelLo),
    ticks,
  };
}

function niceStep(range: number): number {
  const raw = range / 6;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1e4 || abs < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(6)));
}
