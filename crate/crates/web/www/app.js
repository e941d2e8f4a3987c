import init, { Demo } from "./pkg/abscam_web.js";

const $ = (id) => document.getElementById(id);
let demo;
let pixels;

function draw(id, rgba) {
  const size = Demo.size();
  const ctx = $(id).getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
}

function settings() {
  return [pixels, $("method").value, Number($("class").value)];
}

function guarded(fn) {
  return () => {
    $("status").textContent = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

const explain = guarded(() => {
  const e = demo.explain(...settings());
  draw("heatmap", e.heatmap());
  draw("overlay", e.overlay());
  $("overlay-caption").textContent = `class ${e.class()}, p = ${e.probability().toFixed(3)}`;
  e.free();
});

const topk = guarded(() => {
  const fraction = Number($("fraction").value);
  $("fraction-value").textContent = fraction.toFixed(2);
  draw("topk", demo.topk(...settings(), fraction));
});

const curves = guarded(() => {
  const c = demo.curves(...settings(), Number($("steps").value));
  plot([
    { values: c.deletion(), color: "#c0392b", label: `deletion (AUC ${c.deletion_auc().toFixed(3)})` },
    { values: c.insertion(), color: "#2471a3", label: `insertion (AUC ${c.insertion_auc().toFixed(3)})` },
  ]);
  c.free();
});

function plot(series) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const [w, h, pad] = [canvas.width, canvas.height, 30];
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 10, w - pad - 10, h - pad - 10);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText("0", pad - 12, h - pad + 4);
  ctx.fillText("1", pad - 12, 14);
  ctx.fillText("fraction of pixels replaced", w / 2 - 60, h - 8);
  series.forEach((s, i) => {
    const n = s.values.length - 1;
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((p, t) => {
      const x = pad + (t / n) * (w - pad - 10);
      const y = 10 + (1 - p) * (h - pad - 20);
      t === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - 190, 26 + 14 * i);
  });
}

function setPixels(rgba) {
  pixels = rgba;
  draw("input", rgba);
  explain();
  topk();
}

function loadUpload(file) {
  const img = new Image();
  img.onload = () => {
    const size = Demo.size();
    const canvas = document.createElement("canvas");
    canvas.width = canvas.height = size;
    const ctx = canvas.getContext("2d");
    ctx.drawImage(img, 0, 0, size, size);
    setPixels(new Uint8Array(ctx.getImageData(0, 0, size, size).data.buffer));
    URL.revokeObjectURL(img.src);
  };
  img.src = URL.createObjectURL(file);
}

async function main() {
  await init();
  demo = new Demo(0n);
  for (let i = 0; i < 10; i++) $("fixture").add(new Option(`#${i}`, i));
  for (const m of Demo.methods()) $("method").add(new Option(m, m));
  for (let c = 0; c < demo.class_count(); c++) $("class").add(new Option(c, c));

  $("fixture").onchange = () => setPixels(Demo.fixture(Number($("fixture").value)));
  $("upload").onchange = (e) => e.target.files[0] && loadUpload(e.target.files[0]);
  $("method").onchange = () => { explain(); topk(); };
  $("class").onchange = () => { explain(); topk(); };
  $("explain").onclick = explain;
  $("curves").onclick = curves;
  $("fraction").oninput = topk;

  setPixels(Demo.fixture(0));
}

main();
