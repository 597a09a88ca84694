import init, { simulate, check, sweep } from "./pkg/homonym_web.js";

const PRESETS = {
  "full stack, synchronous": `[system]
ids = 1,1,2,2
[failures]
crash = p1@3
crash = p2@9
[timing]
model = sync
[stack]
fd = dhp|homega_adapter
fd = hsigma_sync
consensus = quorum
[inputs]
proposals = 4,2,7,2
[run]
seed = 2
horizon = 120
window = 40
`,
  "homonymous heartbeat detector, partial synchrony": `[system]
ids = 1,1,2
[failures]
crash = p1@10
[timing]
model = partial_sync
gst = 20
delta = 3
[stack]
fd = dhp
[run]
seed = 1
horizon = 120
window = 40
`,
  "majority consensus, asynchronous": `[system]
ids = 1,1,2,3,3
[failures]
t = 2
random_crashes = 0..2
crash_window = 1..40
[timing]
model = async
max_delay = 4
step_gap = 2
[stack]
oracle = homega:stabilize_at=0..60,noise=arbitrary
consensus = majority
[inputs]
proposals = 3,1,4,1,5
[run]
horizon = 600
window = 150
`,
  "anonymous quorum consensus": `[system]
ids = bot,bot,bot,bot
[failures]
crash = p1@10
[timing]
model = async
max_delay = 3
[stack]
oracle = aomega:stabilize_at=25
oracle = hsigma:stabilize_at=25
consensus = anonymous_quorum
[inputs]
proposals = 2,9,4,4
[run]
seed = 21
horizon = 200
window = 50
`,
  "ranking detector, asynchronous": `[system]
ids = 1,2,3,4
[failures]
crash = p1@8
[timing]
model = async
max_delay = 5
[stack]
fd = xi
[run]
seed = 11
horizon = 100
window = 30
`,
};

const $ = (id) => document.getElementById(id);
const SVG = "http://www.w3.org/2000/svg";

function call(result) {
  const v = JSON.parse(result);
  $("error").hidden = !v.error;
  $("error").textContent = v.error ?? "";
  return v.error ? null : v;
}

function cell(tr, text, cls) {
  const td = document.createElement("td");
  td.textContent = text;
  if (cls) td.className = cls;
  tr.appendChild(td);
}

function fill(table, rows) {
  const body = table.querySelector("tbody");
  body.replaceChildren();
  for (const row of rows) {
    const tr = document.createElement("tr");
    for (const [text, cls] of row) cell(tr, text, cls);
    body.appendChild(tr);
  }
}

function verdictRows(verdicts) {
  return verdicts.map((v) => [[v.property], [v.status, v.status], [v.witness]]);
}

function shape(name, attrs, parent) {
  const el = document.createElementNS(SVG, name);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  parent.appendChild(el);
  return el;
}

function drawLanes(run) {
  const svg = $("lanes");
  svg.replaceChildren();
  const n = run.ids.length;
  const lane = 22, left = 70, width = 1000, top = 8;
  const height = top * 2 + n * lane;
  svg.setAttribute("viewBox", `0 0 ${left + width + 10} ${height}`);
  const x = (t) => left + (t / run.horizon) * width;

  shape("rect", {
    class: "window",
    x: x(run.horizon - run.window),
    y: 0,
    width: x(run.horizon) - x(run.horizon - run.window),
    height,
  }, svg);
  run.ids.forEach((id, i) => {
    const y = top + i * lane + lane / 2;
    shape("text", { x: 4, y: y + 4 }, svg).textContent = `p${i} (${id})`;
    shape("line", { x1: left, x2: x(run.horizon), y1: y, y2: y, stroke: "#ccc" }, svg);
  });
  const laneOf = (p) => top + Number(p.slice(1)) * lane;
  for (const c of run.outputs.changes) {
    const y = laneOf(c.proc);
    const tick = shape("line", { class: "change", x1: x(c.time), x2: x(c.time), y1: y + 5, y2: y + lane - 5 }, svg);
    shape("title", {}, tick).textContent = `t=${c.time} ${c.stream}=${c.value}`;
  }
  for (const d of run.decisions) {
    const dot = shape("circle", { class: "decide", cx: x(d.time), cy: laneOf(d.proc) + lane / 2, r: 5 }, svg);
    shape("title", {}, dot).textContent = `t=${d.time} decide ${d.value}`;
  }
  for (const c of run.crashes) {
    const y = laneOf(c.proc);
    shape("line", { class: "crash", x1: x(c.time) - 5, x2: x(c.time) + 5, y1: y + 4, y2: y + lane - 4 }, svg);
    shape("line", { class: "crash", x1: x(c.time) - 5, x2: x(c.time) + 5, y1: y + lane - 4, y2: y + 4 }, svg);
  }
}

function showOutputs(last, n) {
  const streams = Object.keys(last);
  const head = $("outputs").querySelector("thead");
  head.replaceChildren();
  const tr = document.createElement("tr");
  for (const h of ["process", ...streams]) {
    const th = document.createElement("th");
    th.textContent = h;
    tr.appendChild(th);
  }
  head.appendChild(tr);
  const rows = [];
  for (let i = 0; i < n; i++) {
    const p = `p${i}`;
    rows.push([[p], ...streams.map((s) => [last[s][p] ?? "-"])]);
  }
  fill($("outputs"), rows);
}

function runScenario() {
  const run = call(simulate($("scenario").value));
  if (!run) return;
  $("result").hidden = false;
  $("tamper").hidden = false;
  const crashed = run.crashes.map((c) => `${c.proc}@${c.time}`).join(", ") || "none";
  $("summary").textContent =
    `seed ${run.seed}, ${run.events} events, ${run.sends} sends, crashes: ${crashed}. ` +
    `Shaded: the window in which eventual properties are judged.`;
  drawLanes(run);
  fill($("verdicts"), verdictRows(run.verdicts));
  showOutputs(run.outputs.last, run.ids.length);
  fill($("decisions"), run.decisions.map((d) => [[d.proc], [d.time], [d.value], [d.round ?? "-"]]));
  $("trace").value = run.trace;
  fill($("checked"), []);
}

function checkTrace() {
  const v = call(check($("scenario").value, $("trace").value));
  if (v) fill($("checked"), verdictRows(v.verdicts));
}

function sweepSeeds() {
  const first = BigInt($("first").value || 0);
  const last = BigInt($("last").value || 0);
  const v = call(sweep($("scenario").value, first, last));
  if (!v) return;
  fill($("tally"), v.rows.map((r) => [
    [r.property],
    [r.pass, "PASS"],
    [r.fail, r.fail ? "FAIL" : ""],
    [r.inconclusive, r.inconclusive ? "INCONCLUSIVE" : ""],
    [r.first_fail ? `${r.first_fail.seed}: ${r.first_fail.witness}` : "-"],
  ]));
  const rounds = Object.entries(v.rounds).map(([r, k]) => `round ${r}: ${k}`).join(", ");
  $("rounds").textContent = rounds ? `${v.runs} runs; last decision ${rounds}` : `${v.runs} runs`;
}

await init();
for (const name of Object.keys(PRESETS)) {
  const o = document.createElement("option");
  o.textContent = name;
  $("preset").appendChild(o);
}
$("preset").addEventListener("change", () => {
  $("scenario").value = PRESETS[$("preset").value];
  runScenario();
});
$("run").addEventListener("click", runScenario);
$("check").addEventListener("click", checkTrace);
$("sweep").addEventListener("click", sweepSeeds);
$("scenario").value = PRESETS[Object.keys(PRESETS)[0]];
runScenario();
