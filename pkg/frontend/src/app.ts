/** Browser shell: canvas editor on the left, ranked results on the right. */

import { QueryClient, QueryOutcome } from "./client.js";
import { EditorState } from "./editor.js";
import { PoseLibrary, parsePoseDocument } from "./presets.js";
import { ResultPanelState } from "./results.js";
import type { Triplet } from "./schema.js";
import { COCO_KEYPOINT_NAMES, stickFigure } from "./skeleton.js";

const HANDLE_RADIUS = 6;

interface AppConfig {
  serviceUrl: string;
  thumbnailTemplate?: string;
}

export function startApp(root: HTMLElement, config: AppConfig): void {
  const editor = new EditorState();
  const client = new QueryClient(config.serviceUrl);
  let library = new PoseLibrary();
  let panel = new ResultPanelState([]);
  let dragging: number | null = null;
  let liveMode = false;

  root.innerHTML = `
    <div class="layout">
      <div class="editor-pane">
        <canvas id="editor" width="256" height="256"></canvas>
        <div class="controls">
          <label>k <input id="k" type="number" min="1" max="100" value="5"></label>
          <label><input id="live" type="checkbox"> live query</label>
          <button id="run">Search</button>
          <input id="preset" type="file" accept=".json">
          <input id="library" type="file" accept=".json" title="pose library">
        </div>
        <div id="hint" class="hint"></div>
        <div id="banner" class="banner" hidden></div>
      </div>
      <div id="results" class="results"></div>
    </div>`;

  const canvas = root.querySelector<HTMLCanvasElement>("#editor")!;
  const ctx = canvas.getContext("2d")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const hint = root.querySelector<HTMLElement>("#hint")!;
  const resultsBox = root.querySelector<HTMLElement>("#results")!;

  function drawEditor(): void {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const figure = stickFigure(editor.fullSkeleton);
    ctx.strokeStyle = "#2b6cb0";
    ctx.lineWidth = 2;
    for (const [x1, y1, x2, y2] of figure.bones) {
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
    }
    editor.midpoints.forEach((t) => {
      if (t[2] > 0) {
        ctx.fillStyle = "#a0aec0";
        ctx.beginPath();
        ctx.arc(t[0], t[1], 3, 0, 2 * Math.PI);
        ctx.fill();
      }
    });
    editor.keypoints.forEach((t, i) => {
      ctx.fillStyle = t[2] > 0 ? "#e53e3e" : "#cbd5e0";
      ctx.beginPath();
      ctx.arc(t[0], t[1], HANDLE_RADIUS, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#1a202c";
      ctx.font = "8px sans-serif";
      ctx.fillText(COCO_KEYPOINT_NAMES[i], t[0] + 7, t[1] - 4);
    });
    hint.textContent = editor.blockedReason ?? "";
  }

  function hitTest(x: number, y: number): number | null {
    for (let i = 0; i < editor.keypoints.length; i++) {
      const [kx, ky] = editor.keypoints[i];
      if (Math.hypot(kx - x, ky - y) <= HANDLE_RADIUS + 2) return i;
    }
    return null;
  }

  function applyOutcome(outcome: QueryOutcome): void {
    if (outcome.stale) return; // superseded by a newer request
    if (outcome.error) {
      banner.textContent = outcome.error;
      banner.hidden = false;
      return;
    }
    banner.hidden = true;
    panel = new ResultPanelState(outcome.results ?? [], {
      thumbnailTemplate: config.thumbnailTemplate,
      library,
    });
    drawResults();
  }

  function drawResults(): void {
    resultsBox.innerHTML = "";
    panel.entries.forEach((entry, i) => {
      const card = document.createElement("div");
      card.className = "card";
      const title = document.createElement("div");
      title.textContent = `${entry.id}  d=${entry.distance}`;
      card.appendChild(title);
      if (entry.thumbnailUrl) {
        const img = document.createElement("img");
        img.src = entry.thumbnailUrl;
        img.width = 128;
        card.appendChild(img);
      }
      if (entry.skeleton) {
        card.appendChild(renderThumbSkeleton(entry.skeleton));
      }
      card.addEventListener("click", () => {
        const pose = panel.poseForClick(i);
        if (pose) {
          editor.loadPose(pose);
          drawEditor();
          void client.query(editor.toPayload()).then(applyOutcome);
        }
      });
      resultsBox.appendChild(card);
    });
  }

  function renderThumbSkeleton(keypoints: Triplet[]): HTMLCanvasElement {
    const thumb = document.createElement("canvas");
    thumb.width = 128;
    thumb.height = 128;
    const tctx = thumb.getContext("2d")!;
    const labeled = keypoints.filter((t) => t[2] > 0);
    if (labeled.length === 0) return thumb;
    const xs = labeled.map((t) => t[0]);
    const ys = labeled.map((t) => t[1]);
    const x0 = Math.min(...xs);
    const y0 = Math.min(...ys);
    const span = Math.max(Math.max(...xs) - x0, Math.max(...ys) - y0) || 1;
    const scale = 112 / span;
    const mapped = keypoints.map(
      (t) => [8 + (t[0] - x0) * scale, 8 + (t[1] - y0) * scale, t[2]] as Triplet,
    );
    const figure = stickFigure(mapped);
    tctx.strokeStyle = "#38a169";
    for (const [x1, y1, x2, y2] of figure.bones) {
      tctx.beginPath();
      tctx.moveTo(x1, y1);
      tctx.lineTo(x2, y2);
      tctx.stroke();
    }
    return thumb;
  }

  canvas.addEventListener("mousedown", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const hit = hitTest(ev.clientX - rect.left, ev.clientY - rect.top);
    if (hit !== null && ev.shiftKey) {
      editor.toggleVisibility(hit);
      drawEditor();
    } else {
      dragging = hit;
    }
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (dragging === null) return;
    const rect = canvas.getBoundingClientRect();
    editor.dragTo(dragging, ev.clientX - rect.left, ev.clientY - rect.top);
    drawEditor();
    if (liveMode && editor.canQuery) {
      client.queryLive(editor.toPayload(), applyOutcome);
    }
  });
  canvas.addEventListener("mouseup", () => (dragging = null));

  root.querySelector<HTMLInputElement>("#k")!.addEventListener("change", (ev) => {
    editor.k = Number((ev.target as HTMLInputElement).value);
  });
  root.querySelector<HTMLInputElement>("#live")!.addEventListener("change", (ev) => {
    liveMode = (ev.target as HTMLInputElement).checked;
  });
  root.querySelector<HTMLButtonElement>("#run")!.addEventListener("click", () => {
    if (editor.canQuery) void client.query(editor.toPayload()).then(applyOutcome);
  });
  root.querySelector<HTMLInputElement>("#preset")!.addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const records = parsePoseDocument(JSON.parse(await file.text()));
    if (records.length > 0) {
      editor.loadPose(records[0]);
      drawEditor();
    }
  });
  root.querySelector<HTMLInputElement>("#library")!.addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    library = PoseLibrary.fromDocument(JSON.parse(await file.text()));
  });

  drawEditor();
}
