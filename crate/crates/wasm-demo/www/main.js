import init, { simulate_path, test_series, regime_map } from "./pkg/rcar_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let lastPath = null;
let lastMap = null;

function showError(id, e) {
  $(id).innerHTML = `<span class="err">${String(e)}</span>`;
}

function plotLine(canvas, ys) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const y of ys) { if (y < lo) lo = y; if (y > hi) hi = y; }
  if (hi === lo) { hi += 1; lo -= 1; }
  const px = (i) => 40 + (i / (ys.length - 1)) * (w - 50);
  const py = (y) => h - 15 - ((y - lo) / (hi - lo)) * (h - 30);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath(); ctx.moveTo(40, py(0)); ctx.lineTo(w - 10, py(0)); ctx.stroke();
  ctx.strokeStyle = "#1f5fa8";
  ctx.beginPath();
  ys.forEach((y, i) => (i ? ctx.lineTo(px(i), py(y)) : ctx.moveTo(px(i), py(y))));
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(hi.toPrecision(3), 2, 12);
  ctx.fillText(lo.toPrecision(3), 2, h - 4);
}

function runSimulation() {
  try {
    lastPath = simulate_path(num("sim-phi"), num("sim-s2"), $("sim-law").value, num("sim-t"), num("sim-seed"));
    $("sim-msg").textContent = `${lastPath.length} observations`;
    $("sim-send").disabled = false;
    plotLine($("sim-canvas"), lastPath);
  } catch (e) {
    showError("sim-msg", e);
  }
}

function fmt(x) {
  if (x === "inf" || x === Infinity) return "saturated (+inf)";
  return typeof x === "number" ? (Math.abs(x) >= 1e5 || (x !== 0 && Math.abs(x) < 1e-3) ? x.toExponential(4) : x.toFixed(4)) : String(x);
}

function runTest() {
  $("test-out").innerHTML = "";
  try {
    const res = JSON.parse(test_series($("test-data").value, $("test-null").value, $("test-loggls").checked, num("test-seed")));
    const o = res.outcome, d = res.decision;
    const rows = [
      ["T / p / R", `${o.t} / ${o.p} / ${o.r}`],
      ["D_T", fmt(o.d_t)],
      ["l_T", fmt(o.l_t)],
      ["Theta", fmt(o.theta)],
      ["critical value", fmt(o.critical_value)],
      ["p-value", fmt(o.p_value)],
      ["single test", o.reject ? "reject H0" : "do not reject H0"],
      [`Q(alpha), S = ${d.s_used}`, fmt(d.q_alpha)],
      ["bound", fmt(d.bound)],
      ["strong rule", d.decision === "accept_null" ? "accept H0" : "reject H0"],
    ];
    $("test-out").innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
    $("test-msg").innerHTML = `<span class="verdict">Verdict: ${res.verdict}</span>`;
  } catch (e) {
    showError("test-msg", e);
  }
}

function colour(v, scale) {
  const a = Math.min(1, Math.abs(v) / scale);
  const c = Math.round(255 * (1 - a));
  return v < 0 ? `rgb(${c},${c},255)` : `rgb(255,${c},${c})`;
}

function drawMap() {
  try {
    lastMap = JSON.parse(regime_map(num("map-phi"), num("map-s2"), num("map-n")));
  } catch (e) {
    showError("map-msg", e);
    return;
  }
  const canvas = $("map-canvas"), ctx = canvas.getContext("2d");
  const { phis, sigmas, lyapunov, boundary } = lastMap;
  const n = phis.length, cw = canvas.width / n, ch = canvas.height / n;
  const finite = lyapunov.filter(Number.isFinite).map(Math.abs);
  const scale = Math.max(...finite) || 1;
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const v = lyapunov[j * n + i];
      ctx.fillStyle = Number.isFinite(v) ? colour(v, scale) : "#88f";
      ctx.fillRect(i * cw, canvas.height - (j + 1) * ch, cw + 1, ch + 1);
    }
  }
  const sMax = sigmas[n - 1], pMax = phis[n - 1];
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 2;
  ctx.beginPath();
  let started = false;
  boundary.forEach((s, i) => {
    if (s === null || s > sMax) { started = false; return; }
    const x = (phis[i] / pMax) * canvas.width, y = canvas.height - (s / sMax) * canvas.height;
    started ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    started = true;
  });
  ctx.stroke();
}

function pickFromMap(ev) {
  if (!lastMap) return;
  const canvas = $("map-canvas"), r = canvas.getBoundingClientRect();
  const n = lastMap.phis.length;
  const phi = ((ev.clientX - r.left) / r.width) * lastMap.phis[n - 1];
  const s2 = (1 - (ev.clientY - r.top) / r.height) * lastMap.sigmas[n - 1];
  $("sim-phi").value = phi.toFixed(3);
  $("sim-s2").value = Math.max(0, s2).toFixed(3);
  runSimulation();
}

await init();
$("sim-run").addEventListener("click", runSimulation);
$("sim-send").addEventListener("click", () => {
  if (lastPath) $("test-data").value = Array.from(lastPath, (x) => x.toPrecision(10)).join("\n");
});
$("test-run").addEventListener("click", runTest);
$("map-run").addEventListener("click", drawMap);
$("map-canvas").addEventListener("click", pickFromMap);
runSimulation();
drawMap();
