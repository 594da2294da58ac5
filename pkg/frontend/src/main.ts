// Browser wiring: canvases, timeline, keyframe pin list, trajectory board,
// job submission and monitoring. All logic lives in the imported modules;
// this file only owns the DOM.

import { ApiClient } from "./api.js";
import { JobMonitor } from "./jobs.js";
import {
  defaultCamera,
  renderRootPath,
  renderSkeleton,
  renderTrajectory,
  screenToGround,
  type DrawCommand,
  type TopDownView,
} from "./render.js";
import { EditorSession } from "./session.js";
import type { MotionData } from "./types.js";

const api = new ApiClient("");
const session = new EditorSession();
let resultMotion: MotionData | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const viewport = el<HTMLCanvasElement>("viewport");
const board = el<HTMLCanvasElement>("board");
const timeline = el<HTMLInputElement>("timeline");
const status = el<HTMLDivElement>("status");
const energyCanvas = el<HTMLCanvasElement>("energy");

const topDown: TopDownView = { scale: 1.0, centerX: board.width / 2, centerY: board.height / 2 };

function drawCommands(ctx: CanvasRenderingContext2D, commands: DrawCommand[]): void {
  for (const cmd of commands) {
    ctx.strokeStyle = cmd.style;
    ctx.fillStyle = cmd.style;
    if (cmd.kind === "line") {
      ctx.beginPath();
      ctx.moveTo(cmd.from[0], cmd.from[1]);
      ctx.lineTo(cmd.to[0], cmd.to[1]);
      ctx.stroke();
    } else {
      ctx.beginPath();
      ctx.arc(cmd.at[0], cmd.at[1], cmd.radius, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

function redraw(): void {
  const ctx = viewport.getContext("2d")!;
  ctx.clearRect(0, 0, viewport.width, viewport.height);
  const camera = defaultCamera(viewport.width, viewport.height);
  const frame = session.playback.frame;
  if (session.motion) {
    drawCommands(ctx, renderSkeleton(session.motion, frame, camera, "#555"));
  }
  if (resultMotion && frame < resultMotion.frames.xr.length) {
    drawCommands(ctx, renderSkeleton(resultMotion, frame, camera, "#c33"));
  }
  const bctx = board.getContext("2d")!;
  bctx.clearRect(0, 0, board.width, board.height);
  if (session.motion) drawCommands(bctx, renderRootPath(topDown, session.motion));
  drawCommands(bctx, renderTrajectory(topDown, session.trajectory));
  if (resultMotion) drawCommands(bctx, renderRootPath(topDown, resultMotion, "#c33"));
}

function plotEnergy(points: Array<{ best_energy: number }>): void {
  const ctx = energyCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, energyCanvas.width, energyCanvas.height);
  if (points.length < 2) return;
  const values = points.map((p) => p.best_energy);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  ctx.strokeStyle = "#07c";
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * energyCanvas.width;
    const y = energyCanvas.height - ((v - lo) / Math.max(hi - lo, 1e-12)) * energyCanvas.height;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function setStatus(text: string): void {
  status.textContent = text;
}

async function uploadFile(file: File): Promise<void> {
  const motion = JSON.parse(await file.text()) as MotionData;
  const { id } = await api.uploadMotion(motion);
  session.loadMotion(id, motion);
  timeline.max = String(session.frameCount - 1);
  resultMotion = null;
  setStatus(`loaded ${file.name} as ${id} (${session.frameCount} frames)`);
  redraw();
}

el<HTMLInputElement>("file").addEventListener("change", (event) => {
  const file = (event.target as HTMLInputElement).files?.[0];
  if (file) void uploadFile(file);
});

timeline.addEventListener("input", () => {
  session.playback.frame = Number(timeline.value);
  redraw();
});

el<HTMLButtonElement>("pin").addEventListener("click", () => {
  try {
    session.pinKeyframe(session.playback.frame);
    setStatus(`pinned frame ${session.playback.frame} `
      + `(${session.keyframes.size} keyframes)`);
  } catch (err) {
    setStatus(String(err));
  }
});

el<HTMLButtonElement>("play").addEventListener("click", () => {
  session.playback.playing = !session.playback.playing;
});

board.addEventListener("pointerdown", (event) => {
  const rect = board.getBoundingClientRect();
  session.appendTrajectoryPoint(
    screenToGround(topDown, [event.clientX - rect.left, event.clientY - rect.top]));
  redraw();
});

el<HTMLButtonElement>("clear-traj").addEventListener("click", () => {
  session.clearTrajectory();
  redraw();
});

function monitor(jobId: string): void {
  session.activeJobId = jobId;
  const mon = new JobMonitor(api, jobId, {
    onProgress: (job) => {
      setStatus(`job ${job.id}: ${job.state} ${(job.progress * 100).toFixed(0)}%`);
      plotEnergy(job.trace);
    },
    onDone: (_job, result) => {
      resultMotion = result;
      session.activeJobId = null;
      setStatus(`job done: ${result.frames.xr.length} frames`);
      redraw();
    },
    onFailed: (job) => {
      session.activeJobId = null;
      setStatus(`job failed: ${job.error}`);
    },
  });
  mon.start();
}

el<HTMLButtonElement>("submit-inbetween").addEventListener("click", () => {
  const issue = session.inbetweenIssue();
  if (issue) {
    setStatus(issue);
    return;
  }
  void api.submitJob(session.inbetweenRequest()).then(({ id }) => monitor(id));
});

el<HTMLButtonElement>("submit-renavigate").addEventListener("click", () => {
  const issue = session.renavigateIssue();
  if (issue) {
    setStatus(issue);
    return;
  }
  void api.submitJob(session.renavigateRequest()).then(({ id }) => monitor(id));
});

setInterval(() => {
  if (session.playback.playing) {
    session.tick();
    timeline.value = String(session.playback.frame);
    redraw();
  }
}, 1000 / 30);

setStatus("upload a .motion.json to begin");
redraw();
