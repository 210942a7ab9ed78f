// Wires the three forms to the wasm exports and draws on plain canvases.
import init, { ou_moment_curve, volterra_series, semigroup_smoothing } from "./pkg/spde_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function draw(canvas, t, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.y.concat(s.band ? s.band.flat() : [])).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...t), Math.max(...t)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) * 1.05 || 1];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  series.forEach((s, i) => {
    ctx.strokeStyle = ctx.fillStyle = COLORS[i % COLORS.length];
    if (s.dots) {
      t.forEach((x, k) => {
        if (s.band) {
          ctx.beginPath();
          ctx.moveTo(px(x), py(s.band[k][0]));
          ctx.lineTo(px(x), py(s.band[k][1]));
          ctx.stroke();
        }
        ctx.fillRect(px(x) - 2, py(s.y[k]) - 2, 4, 4);
      });
    } else {
      ctx.beginPath();
      t.forEach((x, k) => (k ? ctx.lineTo(px(x), py(s.y[k])) : ctx.moveTo(px(x), py(s.y[k]))));
      ctx.stroke();
    }
    ctx.fillText(s.label, w - pad - 120, pad + 14 * (i + 1));
  });
}

function bind(formId, statusId, run) {
  const form = document.getElementById(formId);
  const status = document.getElementById(statusId);
  const go = (ev) => {
    ev?.preventDefault();
    const p = Object.fromEntries([...new FormData(form)].map(([k, v]) => [k, Number(v)]));
    const t0 = performance.now();
    try {
      status.className = "status";
      status.textContent = run(p) + ` (${(performance.now() - t0).toFixed(0)} ms)`;
    } catch (e) {
      status.className = "status error";
      status.textContent = String(e.message ?? e);
    }
  };
  form.addEventListener("submit", go);
  go();
}

await init();

bind("ou-form", "ou-status", (p) => {
  const r = JSON.parse(ou_moment_curve(p.lambda, p.v, p.xi, p.t_end, 32, p.paths, p.seed));
  const band = r.mean.map((m, k) => [m - 3 * r.se[k], m + 3 * r.se[k]]);
  draw(document.getElementById("ou-plot"), r.t, [
    { y: r.mean, band, dots: true, label: "ensemble ±3 SE" },
    { y: r.oracle, label: "closed form" },
  ]);
  const n = r.t.length - 1;
  const z = (r.mean[n] - r.oracle[n]) / r.se[n];
  return `E|X(T)|² = ${r.mean[n].toFixed(5)} ± ${r.se[n].toFixed(5)}, closed form ${r.oracle[n].toFixed(6)}, z = ${z.toFixed(2)}`;
});

bind("series-form", "series-status", (p) => {
  const r = JSON.parse(volterra_series(p.mu1, p.mu2, p.t_end, 100));
  draw(document.getElementById("series-plot"), r.t, [
    { y: r.series, label: "series" },
    { y: r.bound, label: "bound" },
  ]);
  const ok = r.series.every((s, k) => s <= r.bound[k]);
  return ok ? "series below the bound at every node" : "bound violated";
});

bind("smooth-form", "smooth-status", (p) => {
  const r = JSON.parse(semigroup_smoothing(p.nu, p.d, p.t_end, 200));
  draw(document.getElementById("smooth-plot"), r.t, [
    { y: r.weighted, label: "t^ν‖A^νS(t)‖" },
    { y: r.t.map(() => r.iota), label: "ι_ν" },
  ]);
  return `ι_ν = ${r.iota.toPrecision(6)}, max eigenvalue ${Math.max(...r.eigenvalues).toPrecision(4)}`;
});
