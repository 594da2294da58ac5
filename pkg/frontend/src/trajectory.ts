// Trajectory drawing helpers: an editor polyline becomes the per-frame
// ground-plane samples the service expects (arclength-uniform, same rule as
// the server's resampler).

export type Point2 = [number, number];

export function resamplePolyline(points: Point2[], frames: number): Point2[] {
  if (points.length < 2) {
    throw new Error("polyline needs at least 2 points");
  }
  const seg: number[] = [];
  const arc: number[] = [0];
  for (let i = 1; i < points.length; i++) {
    const d = Math.hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1]);
    seg.push(d);
    arc.push(arc[i - 1] + d);
  }
  const total = arc[arc.length - 1];
  const out: Point2[] = [];
  if (total <= 1e-12) {
    for (let i = 0; i < frames; i++) out.push([points[0][0], points[0][1]]);
    return out;
  }
  for (let i = 0; i < frames; i++) {
    const target = (total * i) / (frames - 1);
    let k = arc.findIndex((a) => a > target) - 1;
    if (k < 0) k = seg.length - 1;
    k = Math.min(k, seg.length - 1);
    const u = seg[k] > 0 ? (target - arc[k]) / seg[k] : 0;
    out.push([
      points[k][0] + u * (points[k + 1][0] - points[k][0]),
      points[k][1] + u * (points[k + 1][1] - points[k][1]),
    ]);
  }
  return out;
}

export function polylineLength(points: Point2[]): number {
  let total = 0;
  for (let i = 1; i < points.length; i++) {
    total += Math.hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1]);
  }
  return total;
}
