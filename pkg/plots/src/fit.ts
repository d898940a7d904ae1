/** Log-log slope fitting, matching the sweep harness's conventions exactly:
 * least squares on the last `tail` points, non-positive values dropped, and a
 * "zero-floor" flag when fewer than two positive points remain.
 */

export interface SlopeFit {
  slope: number | null;
  flag: "" | "zero-floor";
}

export function fitLoglogSlope(
  eps: number[],
  values: Array<number | null>,
  tail = 3,
): SlopeFit {
  const pairs: Array<[number, number]> = [];
  const start = Math.max(0, eps.length - tail);
  for (let i = start; i < eps.length; i++) {
    const v = values[i];
    if (v !== null && v > 0 && eps[i] > 0) {
      pairs.push([Math.log(eps[i]), Math.log(v)]);
    }
  }
  if (pairs.length < 2) {
    return { slope: null, flag: "zero-floor" };
  }
  const n = pairs.length;
  let sx = 0;
  let sy = 0;
  for (const [x, y] of pairs) {
    sx += x;
    sy += y;
  }
  const mx = sx / n;
  const my = sy / n;
  let sxx = 0;
  let sxy = 0;
  for (const [x, y] of pairs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  return { slope: sxy / sxx, flag: "" };
}

/** max/min over positive entries; 1 with "all-zero" when none are positive. */
export function positiveSpread(values: Array<number | null>): {
  spread: number;
  flag: "" | "all-zero";
} {
  const pos = values.filter((v): v is number => v !== null && v > 0);
  if (pos.length === 0) {
    return { spread: 1.0, flag: "all-zero" };
  }
  return { spread: Math.max(...pos) / Math.min(...pos), flag: "" };
}
