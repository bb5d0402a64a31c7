// Demo page wiring: calls the wasm exports and draws on plain canvases.
// Build the module first: `wasm-pack build crates/wasm --target web --out-dir www/pkg`

import init, { recovery_demo, theory_curves, maurey_demo } from "./pkg/ilo_wasm.js";

const css = (name) => getComputedStyle(document.documentElement).getPropertyValue(name).trim();
const COL = {
  ink: "#9aa4b2", obs: "#444c59", csgm: "#f2a65e", ilo: "#5ec8f2",
  sudakov: "#8be28b", grid: "#232a33",
};

const $ = (id) => document.getElementById(id);
const status = $("status");

function bindSlider(id, fmt = (v) => v) {
  const el = $(id);
  const label = $(id + "-v");
  const update = () => { if (label) label.textContent = fmt(el.value); };
  el.addEventListener("input", update);
  update();
  return el;
}

function clearCanvas(ctx) {
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function plotLines(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  clearCanvas(ctx);
  const padL = 46, padR = 12, padT = 12, padB = 24;
  const W = canvas.width - padL - padR, H = canvas.height - padT - padB;
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.y.length; i++) {
      const x = s.x ? s.x[i] : i;
      if (!isFinite(x) || !isFinite(s.y[i])) continue;
      xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
      ymin = Math.min(ymin, s.y[i]); ymax = Math.max(ymax, s.y[i]);
    }
  }
  if (!isFinite(xmin) || xmin === xmax) { xmin -= 1; xmax += 1; }
  if (!isFinite(ymin) || ymin === ymax) { ymin -= 1; ymax += 1; }
  const pad = (ymax - ymin) * 0.06;
  ymin -= pad; ymax += pad;
  const tx = (x) => padL + ((opts.logx ? Math.log10(x / xmin) / Math.log10(xmax / xmin) : (x - xmin) / (xmax - xmin))) * W;
  const ty = (y) => padT + (1 - (y - ymin) / (ymax - ymin)) * H;

  ctx.strokeStyle = COL.grid; ctx.lineWidth = 1;
  ctx.fillStyle = "#6b7480";
  ctx.font = "11px system-ui";
  const yticks = 5;
  for (let i = 0; i <= yticks; i++) {
    const y = ymin + (i / yticks) * (ymax - ymin);
    ctx.beginPath(); ctx.moveTo(padL, ty(y)); ctx.lineTo(padL + W, ty(y)); ctx.stroke();
    ctx.fillText(y.toPrecision(3), 4, ty(y) + 4);
  }
  if (opts.xlabel) ctx.fillText(opts.xlabel, padL + W / 2 - 20, canvas.height - 6);

  if (opts.vline !== undefined && opts.vline > xmin && opts.vline < xmax) {
    ctx.save();
    ctx.strokeStyle = "#888"; ctx.setLineDash([5, 5]);
    ctx.beginPath(); ctx.moveTo(tx(opts.vline), padT); ctx.lineTo(tx(opts.vline), padT + H); ctx.stroke();
    ctx.restore();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.lineWidth = s.width || 1.8;
    ctx.globalAlpha = s.alpha ?? 1;
    ctx.beginPath();
    let started = false;
    for (let i = 0; i < s.y.length; i++) {
      const x = s.x ? s.x[i] : i;
      if (!isFinite(x) || !isFinite(s.y[i])) continue;
      const px = tx(x), py = ty(s.y[i]);
      if (!started) { ctx.moveTo(px, py); started = true; } else ctx.lineTo(px, py);
    }
    ctx.stroke();
    ctx.globalAlpha = 1;
  }
}

// ---- panel 1: recovery -----------------------------------------------------

const recM = bindSlider("rec-m");
const recNoise = bindSlider("rec-noise", (v) => Number(v).toFixed(2));
const recSteps = bindSlider("rec-steps");

async function runRecovery() {
  const btn = $("rec-run");
  btn.disabled = true;
  status.textContent = "solving…";
  await new Promise((r) => setTimeout(r, 20)); // let the UI paint
  try {
    const out = JSON.parse(recovery_demo(
      $("rec-op").value,
      Number(recM.value),
      Number(recNoise.value),
      $("rec-plant").value === "true",
      Number(recSteps.value),
      BigInt($("rec-seed").value || 0),
    ));
    plotLines($("rec-signal"), [
      { y: out.observed_view, color: COL.obs, width: 1.2, alpha: 0.9 },
      { y: out.truth, color: COL.ink, width: 2.2 },
      { y: out.csgm_estimate, color: COL.csgm, width: 1.6 },
      { y: out.ilo_estimate, color: COL.ilo, width: 1.6 },
    ]);
    plotLines($("rec-trace"), [
      { y: out.csgm_trace, color: COL.csgm },
      { y: out.ilo_trace, color: COL.ilo },
    ], { xlabel: "evaluation" });
    const f = (v) => Number(v).toExponential(2);
    $("rec-readout").innerHTML =
      `m = <b>${out.m}</b> &middot; true MSE &mdash; CSGM: <b>${f(out.csgm_true_mse)}</b>, ` +
      `layered: <b>${f(out.ilo_true_mse)}</b> ` +
      `(ratio <b>${(out.csgm_true_mse / out.ilo_true_mse).toFixed(1)}&times;</b>)`;
    status.textContent = "";
  } catch (e) {
    status.textContent = `error: ${e}`;
  } finally {
    btn.disabled = false;
  }
}

// ---- panel 2: covering bounds ----------------------------------------------

const thD = bindSlider("th-d", (v) => String(1 << Number(v)));
const thR = bindSlider("th-r", (v) => Number(v).toFixed(2));

function runTheory() {
  try {
    const out = JSON.parse(theory_curves(1 << Number(thD.value), Number(thR.value)));
    plotLines($("th-canvas"), [
      { x: out.deltas, y: out.maurey.map(Math.log10), color: COL.ilo },
      { x: out.deltas, y: out.volumetric.map((v) => Math.log10(Math.max(v, 1e-3))), color: COL.csgm },
      { x: out.deltas, y: out.sudakov.map(Math.log10), color: COL.sudakov },
    ], { logx: true, vline: out.crossover_delta, xlabel: "δ (log scale) — y: log₁₀ of log-cover-size" });
    status.textContent = "";
  } catch (e) {
    status.textContent = `error: ${e}`;
  }
}

// ---- panel 3: net construction ----------------------------------------------

const mnDelta = bindSlider("mn-delta", (v) => Number(v).toFixed(2));
const mnSamples = bindSlider("mn-samples");

function runMaurey() {
  try {
    const out = JSON.parse(maurey_demo(
      1.0,
      Number(mnDelta.value),
      Number(mnSamples.value),
      BigInt($("mn-seed").value || 0),
    ));
    const canvas = $("mn-canvas");
    const ctx = canvas.getContext("2d");
    clearCanvas(ctx);
    const cx = canvas.width / 2, cy = canvas.height / 2;
    const scale = (canvas.width / 2 - 30) / out.r;
    const X = (p) => cx + p[0] * scale;
    const Y = (p) => cy - p[1] * scale;
    // ball outline
    ctx.strokeStyle = "#39424e"; ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(X([out.r, 0]), Y([out.r, 0]));
    for (const p of [[0, out.r], [-out.r, 0], [0, -out.r], [out.r, 0]]) ctx.lineTo(X(p), Y(p));
    ctx.stroke();
    // samples
    ctx.fillStyle = COL.sudakov; ctx.globalAlpha = 0.35;
    for (const s of out.samples) { ctx.fillRect(X(s) - 1.5, Y(s) - 1.5, 3, 3); }
    ctx.globalAlpha = 1;
    // net points
    ctx.fillStyle = COL.ilo;
    for (const p of out.net) { ctx.beginPath(); ctx.arc(X(p), Y(p), 4, 0, 7); ctx.fill(); }
    // delta circle around target + target cross
    ctx.strokeStyle = COL.csgm; ctx.lineWidth = 1; ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.arc(X(out.target), Y(out.target), out.delta * scale, 0, 7); ctx.stroke();
    ctx.setLineDash([]);
    ctx.strokeStyle = COL.csgm; ctx.lineWidth = 2.5;
    const t = out.target, c = 7;
    ctx.beginPath();
    ctx.moveTo(X(t) - c, Y(t)); ctx.lineTo(X(t) + c, Y(t));
    ctx.moveTo(X(t), Y(t) - c); ctx.lineTo(X(t), Y(t) + c);
    ctx.stroke();
    $("mn-readout").innerHTML =
      `t = <b>${out.t}</b> atoms &middot; net size <b>${out.net.length}</b> &middot; ` +
      `mean squared distance <b>${out.mean_sq_dist.toFixed(4)}</b> &le; δ² = <b>${out.bound.toFixed(4)}</b>`;
    status.textContent = "";
  } catch (e) {
    status.textContent = `error: ${e}`;
  }
}

// ---- boot --------------------------------------------------------------------

init().then(() => {
  status.textContent = "";
  $("rec-run").addEventListener("click", runRecovery);
  $("th-run").addEventListener("click", runTheory);
  $("th-d").addEventListener("change", runTheory);
  $("th-r").addEventListener("change", runTheory);
  $("mn-run").addEventListener("click", runMaurey);
  runTheory();
  runMaurey();
  runRecovery();
}).catch((e) => {
  status.textContent = `failed to load wasm module: ${e} — did you run wasm-pack build?`;
});
