import init, { fitSynthetic, estimateCsv, pieceRate } from "./pkg/topshares_web.js";

const $ = (id) => document.getElementById(id);
const pct = (v) => (v == null ? "-" : (100 * v).toFixed(2));

const SAMPLE_BRACKETS = `year,lower_threshold,returns,income_sum
1920,4000000,4,29920
1920,3000000,3,9218
1920,11000,196129,5040037
1920,10000,29984,314400
1920,9000,40129,380899
1920,8000,51211,434462
1920,7000,74511,557104
1920,6000,112444,726362
1920,5000,177147,969505
1920,4000,442557,1972521
1920,3000,894559,3067086
1920,2000,2569316,6184543
1920,1000,2671950,4050067`;
const SAMPLE_DENOMINATORS = `year,population,total_income,income_unit
1920,41909000,60000000,1000`;

function plot(canvas, series, { logX = false, logY = false, marks = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const fx = logX ? Math.log : (v) => v;
  const fy = logY ? Math.log : (v) => v;
  const pts = series.flatMap((s) => s.points).filter((p) => p.density > 0);
  const xs = pts.map((p) => fx(p.income));
  const ys = pts.map((p) => fy(p.density));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (v) => pad + ((fx(v) - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (v) => h - pad - ((fy(v) - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#bbb";
  for (const m of marks) {
    ctx.beginPath();
    ctx.moveTo(sx(m), pad);
    ctx.lineTo(sx(m), h - pad);
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    let started = false;
    for (const p of s.points) {
      if (!(p.density > 0)) continue;
      started ? ctx.lineTo(sx(p.income), sy(p.density)) : ctx.moveTo(sx(p.income), sy(p.density));
      started = true;
    }
    ctx.stroke();
  }
}

function table(head, rows) {
  const th = head.map((c) => `<th>${c}</th>`).join("");
  const tr = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

function label(p) {
  return `P${+(100 * (1 - p)).toFixed(4)}-100`;
}

function showError(target, e) {
  target.innerHTML = `<p class="error">${e.message ?? e}</p>`;
}

function updateFit() {
  $("shape-out").textContent = $("shape").value;
  $("classes-out").textContent = $("classes").value;
  try {
    const fit = JSON.parse(
      fitSynthetic($("family").value, +$("shape").value, +$("classes").value, "0.1,0.05,0.01,0.001"),
    );
    plot(
      $("fit-plot"),
      [
        { points: fit.truth, color: "#c33" },
        { points: fit.curve, color: "#36c" },
      ],
      { logX: true, logY: true, marks: fit.brackets.map((b) => b.threshold) },
    );
    $("fit-shares").innerHTML = table(
      ["", "true %", "PI %", "ME %"],
      fit.shares.map((s) => [label(s.fractile), pct(s.oracle), pct(s.pi), pct(s.me)]),
    );
  } catch (e) {
    showError($("fit-shares"), e);
  }
}

function updateEstimates() {
  try {
    const years = JSON.parse(estimateCsv($("brackets").value, $("denominators").value, $("fractiles").value));
    $("estimates").innerHTML = years
      .map((y) =>
        y.error
          ? `<p class="error">${y.year}: ${y.error}</p>`
          : `<h3>${y.year}</h3>` +
            table(
              ["", "PI %", "ME %"],
              y.rows.map((r) => [label(r.fractile), pct(r.pi), pct(r.me)]),
            ),
      )
      .join("");
  } catch (e) {
    showError($("estimates"), e);
  }
}

function updatePiece() {
  const lower = +$("lower").value;
  const upper = +$("upper").value;
  const mean = lower + (+$("mean").value) * (upper - lower);
  $("mean-out").textContent = mean.toFixed(0);
  try {
    const piece = JSON.parse(pieceRate(lower, upper, mean));
    plot($("piece-plot"), [{ points: piece.curve, color: "#36c" }], { marks: [mean] });
    $("piece-info").textContent = `rate ${piece.rate.toExponential(4)} per unit of income, tilt ${piece.tilt.toFixed(4)}`;
  } catch (e) {
    showError($("piece-info"), e);
  }
}

await init();
$("brackets").value = SAMPLE_BRACKETS;
$("denominators").value = SAMPLE_DENOMINATORS;
for (const id of ["family", "shape", "classes"]) $(id).addEventListener("input", updateFit);
for (const id of ["lower", "upper", "mean"]) $(id).addEventListener("input", updatePiece);
$("estimate").addEventListener("click", updateEstimates);
updateFit();
updateEstimates();
updatePiece();
