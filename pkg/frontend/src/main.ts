import { Api } from "./api.js";
import { LabelController } from "./controller.js";

const api = new Api("");
const controller = new LabelController(api);

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

function render(): void {
  const view = controller.view();
  $("setup").hidden = view.phase !== "idle";
  $("loading").hidden = view.phase !== "loading";
  $("question").hidden = view.phase !== "pending";
  $("result").hidden = view.phase !== "done";
  $("error").hidden = view.phase !== "error";
  $("progress").textContent = `${view.answered} answered`;
  if (view.pair) {
    $("left").textContent = view.pair.u;
    $("right").textContent = view.pair.v;
  }
  if (view.ranking) {
    const list = $("ranking");
    list.replaceChildren(
      ...view.ranking.map((name) => {
        const li = document.createElement("li");
        li.textContent = name;
        return li;
      }),
    );
  }
  if (view.errorMessage) {
    $("error-message").textContent = view.errorMessage;
  }
}

controller.onChange(render);

$("start").addEventListener("click", () => {
  const raw = ($("items") as HTMLTextAreaElement).value;
  const items = raw
    .split("\n")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
  void controller.start(items);
});

$("left").addEventListener("click", () => void controller.choose("left"));
$("right").addEventListener("click", () => void controller.choose("right"));
$("retry").addEventListener("click", () => void controller.retry());

document.addEventListener("keydown", (ev) => {
  if (ev.key === "ArrowLeft") void controller.choose("left");
  if (ev.key === "ArrowRight") void controller.choose("right");
});

render();
