// Plain-JS front end for the wasm demo. Build the module first:
//   wasm-pack build crates/kpcm-wasm --target web
// then serve the crate directory:
//   python3 -m http.server -d crates/kpcm-wasm
// and open http://localhost:8000/www/

import init, { flow_trajectory, field_profile, backlund_map } from "../pkg/kpcm_wasm.js";

const PALETTE = ["#1f6feb", "#d93a2b", "#1a7f37", "#9a44b6", "#b58a00", "#0d7d8c"];

function clearCanvas(ctx) {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function makeMapper(ctx, xs, ys, pad = 30) {
  let xmin = Math.min(...xs), xmax = Math.max(...xs);
  let ymin = Math.min(...ys), ymax = Math.max(...ys);
  if (xmax - xmin < 1e-9) { xmin -= 1; xmax += 1; }
  if (ymax - ymin < 1e-9) { ymin -= 1; ymax += 1; }
  const w = ctx.canvas.width - 2 * pad, h = ctx.canvas.height - 2 * pad;
  return {
    x: v => pad + (v - xmin) / (xmax - xmin) * w,
    y: v => pad + h - (v - ymin) / (ymax - ymin) * h,
  };
}

function drawAxes(ctx, map) {
  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(map.x(0), 0); ctx.lineTo(map.x(0), ctx.canvas.height);
  ctx.moveTo(0, map.y(0)); ctx.lineTo(ctx.canvas.width, map.y(0));
  ctx.stroke();
}

// --- panel 1: trajectories -------------------------------------------------

const trajCanvas = document.getElementById("traj-canvas").getContext("2d");

function renderTrajectory() {
  const n = +document.getElementById("traj-n").value;
  const m = +document.getElementById("traj-m").value;
  const t = +document.getElementById("traj-t").value;
  const seed = BigInt(document.getElementById("traj-seed").value || "0");
  const readout = document.getElementById("traj-readout");
  try {
    const data = JSON.parse(flow_trajectory(n, 1.0, 0.0, seed, m, t));
    const res = data.poles.flat().map(p => p[0]);
    const ims = data.poles.flat().map(p => p[1]);
    clearCanvas(trajCanvas);
    const map = makeMapper(trajCanvas, res, ims);
    drawAxes(trajCanvas, map);
    for (let i = 0; i < n; i++) {
      trajCanvas.strokeStyle = PALETTE[i % PALETTE.length];
      trajCanvas.lineWidth = 1.5;
      trajCanvas.beginPath();
      data.poles.forEach((sample, k) => {
        const [re, im] = sample[i];
        if (k === 0) trajCanvas.moveTo(map.x(re), map.y(im));
        else trajCanvas.lineTo(map.x(re), map.y(im));
      });
      trajCanvas.stroke();
      const [re0, im0] = data.poles[0][i];
      const [re1, im1] = data.poles[data.poles.length - 1][i];
      trajCanvas.fillStyle = PALETTE[i % PALETTE.length];
      trajCanvas.beginPath(); trajCanvas.arc(map.x(re0), map.y(im0), 3, 0, 7); trajCanvas.fill();
      trajCanvas.beginPath(); trajCanvas.arc(map.x(re1), map.y(im1), 5, 0, 7); trajCanvas.fill();
    }
    const drift = Math.max(...data.drift);
    readout.textContent =
      `samples: ${data.times.length}   max |H_k(t) − H_k(0)| along the run: ${drift.toExponential(2)}` +
      `   (dots: start small, end large)`;
    readout.classList.remove("err");
  } catch (e) {
    readout.textContent = `error: ${e}`;
    readout.classList.add("err");
  }
}

// --- panel 2: field profile ------------------------------------------------

const profCanvas = document.getElementById("prof-canvas").getContext("2d");

function renderProfile() {
  const n = +document.getElementById("prof-n").value;
  const m = +document.getElementById("prof-m").value;
  const t = +document.getElementById("prof-t").value;
  const seed = BigInt(document.getElementById("prof-seed").value || "0");
  const readout = document.getElementById("prof-readout");
  try {
    const data = JSON.parse(field_profile(n, 1.0, 0.0, seed, m, t, -4.0, 4.0, 480));
    clearCanvas(profCanvas);
    const values = data.u_re.concat(data.u_im);
    const clip = 60;
    const clipped = values.map(v => Math.max(-clip, Math.min(clip, v)));
    const map = makeMapper(profCanvas, data.x, clipped);
    drawAxes(profCanvas, map);
    const curves = [["u_re", "#1f6feb"], ["u_im", "#d93a2b"]];
    for (const [key, color] of curves) {
      profCanvas.strokeStyle = color;
      profCanvas.lineWidth = 1.5;
      profCanvas.beginPath();
      data.x.forEach((x, k) => {
        const v = Math.max(-clip, Math.min(clip, data[key][k]));
        if (k === 0) profCanvas.moveTo(map.x(x), map.y(v));
        else profCanvas.lineTo(map.x(x), map.y(v));
      });
      profCanvas.stroke();
    }
    profCanvas.fillStyle = "#444";
    for (const [re] of data.poles) {
      profCanvas.beginPath();
      profCanvas.arc(map.x(re), map.y(0), 3, 0, 7);
      profCanvas.fill();
    }
    readout.textContent =
      `blue: Re u, red: Im u, dots: Re x_i.  ` +
      `determinant-route vs integrated poles: max deviation ${data.route_deviation.toExponential(2)}`;
    readout.classList.remove("err");
  } catch (e) {
    readout.textContent = `error: ${e}`;
    readout.classList.add("err");
  }
}

// --- panel 3: Bäcklund map ---------------------------------------------------

const bkCanvas = document.getElementById("bk-canvas").getContext("2d");

function renderBacklund() {
  const n = +document.getElementById("bk-n").value;
  const mag = +document.getElementById("bk-mag").value;
  const arg = +document.getElementById("bk-arg").value;
  const seed = BigInt(document.getElementById("bk-seed").value || "0");
  const readout = document.getElementById("bk-readout");
  try {
    const mu = [mag * Math.cos(arg), mag * Math.sin(arg)];
    const data = JSON.parse(backlund_map(n, 1.0, 0.0, seed, mu[0], mu[1]));
    clearCanvas(bkCanvas);
    const pts = data.x.concat(data.y);
    const map = makeMapper(bkCanvas, pts.map(p => p[0]), pts.map(p => p[1]));
    drawAxes(bkCanvas, map);
    data.x.forEach(([re, im], i) => {
      bkCanvas.strokeStyle = PALETTE[i % PALETTE.length];
      bkCanvas.fillStyle = PALETTE[i % PALETTE.length];
      bkCanvas.beginPath();
      bkCanvas.arc(map.x(re), map.y(im), 5, 0, 7);
      bkCanvas.fill();
      const [yre, yim] = data.y[i];
      bkCanvas.beginPath();
      bkCanvas.moveTo(map.x(yre) - 5, map.y(yim) - 5); bkCanvas.lineTo(map.x(yre) + 5, map.y(yim) + 5);
      bkCanvas.moveTo(map.x(yre) - 5, map.y(yim) + 5); bkCanvas.lineTo(map.x(yre) + 5, map.y(yim) - 5);
      bkCanvas.stroke();
      bkCanvas.strokeStyle = "#bbb";
      bkCanvas.beginPath();
      bkCanvas.moveTo(map.x(re), map.y(im));
      bkCanvas.lineTo(map.x(yre), map.y(yim));
      bkCanvas.stroke();
    });
    readout.textContent =
      `dots: x_i, crosses: y_i = image positions.  Newton iterations: ${data.iterations}, ` +
      `canonical defect: ${data.canonical_defect.toExponential(2)}`;
    readout.classList.remove("err");
  } catch (e) {
    readout.textContent = `error: ${e}`;
    readout.classList.add("err");
  }
}

// --- wire-up -----------------------------------------------------------------

await init();

for (const id of ["traj-n", "traj-m", "traj-t", "traj-seed"]) {
  document.getElementById(id).addEventListener("input", renderTrajectory);
}
for (const id of ["prof-n", "prof-m", "prof-t", "prof-seed"]) {
  document.getElementById(id).addEventListener("input", renderProfile);
}
for (const id of ["bk-n", "bk-mag", "bk-arg", "bk-seed"]) {
  document.getElementById(id).addEventListener("input", renderBacklund);
}

renderTrajectory();
renderProfile();
renderBacklund();
