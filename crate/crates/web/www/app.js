// Built with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { generate, run_heuristic, check_schedule } from "./pkg/risnet_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("floor");
const ctx = canvas.getContext("2d");

let scenarioText = null;
let scenario = null;
let result = null;
let timer = null;

function status(msg) {
  $("status").textContent = msg;
}

function params() {
  const num = (id) => Number($(id).value);
  return JSON.stringify({
    robots: num("robots"), slots: num("slots"), ris: num("ris"),
    obstacles: num("obstacles"), seed: num("seed"),
  });
}

function draw() {
  if (!scenario) return;
  const n = Number($("slot").value);
  $("slot-label").textContent = n;
  const c = scenario.config;
  const s = Math.min(canvas.width / c.floor_width_m, canvas.height / c.floor_height_m);
  const X = (p) => p.x * s;
  const Y = (p) => canvas.height - p.y * s;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  ctx.fillStyle = "#777";
  for (const o of scenario.obstacles) {
    ctx.fillRect(X(o.min), Y(o.max), (o.max.x - o.min.x) * s, (o.max.y - o.min.y) * s);
  }
  ctx.fillStyle = "#1565c0";
  scenario.base_stations.forEach((b, k) => {
    ctx.fillRect(X(b) - 6, Y(b) - 6, 12, 12);
    ctx.fillText(`b${k}`, X(b) + 8, Y(b) - 8);
  });
  ctx.fillStyle = "#2e7d32";
  scenario.ris.forEach((m, k) => {
    const p = m.position;
    ctx.fillRect(X(p) - 5, Y(p) - 5, 10, 10);
    ctx.fillText(`i${k}`, X(p) + 7, Y(p) + 14);
  });

  const slot = result ? result.schedule.slots[n] : null;
  scenario.robots.forEach((r, k) => {
    const p = r.trajectory[n];
    const a = slot ? slot[k] : null;
    if (a && a !== "outage") {
      const ris = a.ris !== undefined ? scenario.ris[a.ris] : null;
      ctx.strokeStyle = ris ? "#2e7d32" : "#1565c0";
      ctx.beginPath();
      if (ris) {
        const bs = scenario.base_stations[result.serving_bs[n][a.ris]];
        ctx.moveTo(X(bs), Y(bs));
        ctx.lineTo(X(ris.position), Y(ris.position));
      } else {
        const bs = scenario.base_stations[a.bs];
        ctx.moveTo(X(bs), Y(bs));
      }
      ctx.lineTo(X(p), Y(p));
      ctx.stroke();
    }
    ctx.fillStyle = a === "outage" ? "#c62828" : "#333";
    ctx.beginPath();
    ctx.arc(X(p), Y(p), 5, 0, 2 * Math.PI);
    ctx.fill();
    const db = result && result.sinr_db[n][k];
    ctx.fillText(db != null ? `r${k} ${db.toFixed(1)} dB` : `r${k}`, X(p) + 7, Y(p) - 6);
  });
}

function guarded(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      status(`error: ${e.message ?? e}`);
    }
  };
}

$("generate").onclick = guarded(() => {
  scenarioText = generate(params());
  scenario = JSON.parse(scenarioText);
  result = null;
  $("slot").max = scenario.config.num_slots - 1;
  $("slot").value = 0;
  $("heuristic").disabled = false;
  $("check").disabled = true;
  $("play").disabled = false;
  status(`${scenario.robots.length} robots, ${scenario.ris.length} RIS, ${scenario.obstacles.length} obstacles`);
  draw();
});

$("heuristic").onclick = guarded(() => {
  result = JSON.parse(run_heuristic(scenarioText, BigInt($("seed").value)));
  $("check").disabled = false;
  const f = result.failure;
  status(`outage ${result.outage_pct.toFixed(2)}%\n` +
    (f ? `service failure: robot ${f[0]} in outage for slots ${f[1]}-${f[2]}` : "no service failure"));
  draw();
});

$("check").onclick = guarded(() => {
  const report = JSON.parse(check_schedule(scenarioText, JSON.stringify(result.schedule)));
  status(report.feasible ? "schedule is feasible" :
    `${report.violations.length} violation(s)\n` + report.violations.slice(0, 20).join("\n"));
});

$("slot").oninput = draw;

$("play").onclick = () => {
  if (timer) {
    clearInterval(timer);
    timer = null;
    $("play").textContent = "Play";
    return;
  }
  $("play").textContent = "Pause";
  timer = setInterval(() => {
    const el = $("slot");
    el.value = (Number(el.value) + 1) % (Number(el.max) + 1);
    draw();
  }, 300);
};

await init();
status("ready");
