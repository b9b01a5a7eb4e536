import init, { annealed_curve, delta0_curve, contact_profile } from "../pkg/pinning_demo.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

// Splits a flat row-major array into columns.
function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let i = 0; i + width <= flat.length; i += width) {
    for (let j = 0; j < width; j++) cols[j].push(flat[i + j]);
  }
  return cols;
}

function plot(canvas, x, series, { logX = false, logY = false, xLabel = "", labels = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 70, r: 20, t: 20, b: 40 };
  const tx = logX ? Math.log10 : (v) => v;
  const ty = logY ? Math.log10 : (v) => v;
  const ok = (v, t) => Number.isFinite(t(v));

  const xs = x.filter((v) => ok(v, tx)).map(tx);
  const ys = series.flat().filter((v) => ok(v, ty)).map(ty);
  ctx.clearRect(0, 0, w, h);
  if (!xs.length || !ys.length) return;
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const px = (v) => pad.l + ((tx(v) - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (v) => h - pad.b - ((ty(v) - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(x0, logX), pad.l, h - pad.b + 15);
  ctx.fillText(fmt(x1, logX), w - pad.r - 50, h - pad.b + 15);
  ctx.fillText(xLabel, (w - pad.l) / 2, h - 8);
  ctx.fillText(fmt(y1, logY), 5, pad.t + 10);
  ctx.fillText(fmt(y0, logY), 5, h - pad.b);

  series.forEach((ys, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    let pen = false;
    ys.forEach((y, i) => {
      if (!ok(x[i], tx) || !ok(y, ty)) { pen = false; return; }
      pen ? ctx.lineTo(px(x[i]), py(y)) : ctx.moveTo(px(x[i]), py(y));
      pen = true;
    });
    ctx.stroke();
    if (labels[k]) {
      ctx.fillStyle = COLORS[k % COLORS.length];
      ctx.fillText(labels[k], w - pad.r - 120, pad.t + 15 * (k + 1));
    }
  });
}

function wire(id, action) {
  const root = document.getElementById(id);
  const status = root.querySelector(".status");
  const canvas = root.querySelector("canvas");
  const value = (name) => Number(root.querySelector(`[name=${name}]`).value);
  const run = () => {
    status.textContent = "";
    try {
      action(value, canvas, status);
    } catch (e) {
      status.textContent = String(e.message ?? e);
    }
  };
  root.querySelector("button").addEventListener("click", run);
  run();
}

await init();

wire("annealed", (v, canvas) => {
  const [d, fa, dstar] = columns(annealed_curve(v("c"), v("beta"), v("lo"), v("hi"), 60), 3);
  plot(canvas, d, [dstar, fa], { logX: true, logY: true, xLabel: "Delta", labels: ["delta*", "f_a"] });
});

wire("crossover", (v, canvas, status) => {
  const [b, d0] = columns(delta0_curve(v("c"), v("lo"), v("hi"), 30), 2);
  if (d0.every((x) => Number.isNaN(x))) status.textContent = "no crossover root: finite mean excursions (c > 2)";
  plot(canvas, b, [d0], { logX: true, logY: true, xLabel: "beta", labels: ["Delta0"] });
});

wire("profile", (v, canvas) => {
  const p = contact_profile(v("c"), v("beta"), v("delta"), v("n"), BigInt(v("seed")));
  const n = Array.from(p, (_, i) => i);
  plot(canvas, n, [Array.from(p)], { xLabel: "n", labels: ["P(x_n = 0)"] });
});
